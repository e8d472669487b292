#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "specdet/errors.hpp"

namespace specdet {

inline constexpr const char* kToolVersion = "0.1.0";

/// Everything needed to reproduce a CLI run: the command, its resolved
/// flags, seeds, and checksums of the datasets it read. Written alongside
/// every output file.
struct RunManifest {
    std::string command;
    std::map<std::string, std::string> flags;
    std::uint64_t seed = 0;
    std::string profile_path;
    std::vector<std::pair<std::string, std::uint64_t>> dataset_checksums;
    std::string tool_version = kToolVersion;
    double duration_seconds = 0.0;
};

inline void save_manifest(const RunManifest& m, const std::string& path) {
    nlohmann::json j;
    j["command"] = m.command;
    j["flags"] = m.flags;
    j["seed"] = m.seed;
    if (!m.profile_path.empty()) j["profile"] = m.profile_path;
    nlohmann::json checks = nlohmann::json::object();
    for (const auto& [name, sum] : m.dataset_checksums) {
        char buf[20];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(sum));
        checks[name] = buf;
    }
    j["dataset_checksums"] = checks;
    j["tool_version"] = m.tool_version;
    j["duration_seconds"] = m.duration_seconds;

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("save_manifest: cannot open " + path);
    out << j.dump(2) << "\n";
}

inline nlohmann::json load_manifest_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_manifest: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("load_manifest: " + std::string(e.what()));
    }
    return j;
}

} // namespace specdet
