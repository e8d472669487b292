#pragma once

#include <cstdio>
#include <string>

namespace specdet {

/// Shortest decimal that round-trips a double (17 significant digits).
inline std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace specdet
