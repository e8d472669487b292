#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "specdet/errors.hpp"
#include "specdet/format.hpp"
#include "specdet/image.hpp"
#include "specdet/svd.hpp"

namespace specdet {

/// Everything the detector needs to classify new images, persistable as a
/// key = value text file. lower/upper are the calibrated percentile
/// thresholds on the tail-energy statistic.
struct CalibrationProfile {
    int version = 1;
    std::string dataset_label;
    double alpha = 0.01;
    int m = 1;  // 1-based cutoff index into the merged spectrum
    double lower = 0.0;
    double upper = 0.0;
    int spectrum_size = 0;  // P = K * min(M,N)
    int rows = 0;
    int cols = 0;
    int channels = 0;
    double percentile_lo = 5.0;
    double percentile_hi = 95.0;
    int train_size = 0;
};

inline void validate_profile(const CalibrationProfile& p) {
    if (!(p.alpha > 0.0 && p.alpha <= 1.0))
        throw DataError("profile: alpha must lie in (0,1]");
    if (p.m < 1 || p.m > p.spectrum_size) throw DataError("profile: m outside [1, P]");
    if (!(p.lower >= 0.0) || p.lower > p.upper) throw DataError("profile: requires 0 <= L <= U");
    if (p.rows < 1 || p.cols < 1 || p.channels < 1) throw DataError("profile: bad dimensions");
    if (p.spectrum_size != p.channels * std::min(p.rows, p.cols))
        throw DataError("profile: P inconsistent with dimensions");
    if (!(p.percentile_lo > 0.0 && p.percentile_lo < p.percentile_hi && p.percentile_hi < 100.0))
        throw DataError("profile: percentiles must satisfy 0 < lo < hi < 100");
}

enum class Label { Clean, Adversarial };

struct Verdict {
    double rho = 0.0;
    Label label = Label::Clean;
    std::string profile_id;
};

/// Tail energy from 1-based index m through the end of the spectrum.
inline double rho(const SvdResult& svd, int m) {
    if (m < 1 || m > svd.spectrum_size()) throw std::out_of_range("rho: m outside [1, P]");
    double sum = 0.0;
    for (int i = m - 1; i < svd.spectrum_size(); ++i) sum += svd.values[i] * svd.values[i];
    return sum;
}

struct SelectMResult {
    int m = 0;
    int skipped_zero = 0;  // all-zero spectra excluded from the count
};

/// Smallest m such that at least `coverage` of the images already satisfy
/// s_i <= alpha * s_1 at some index i <= m. Throws if no m within [1, P]
/// reaches the coverage, i.e. calibration is impossible at this alpha.
inline SelectMResult select_m(const std::vector<SvdResult>& spectra, double alpha,
                              double coverage = 0.95) {
    if (spectra.empty()) throw DataError("select_m: no spectra");
    const int p = spectra.front().spectrum_size();
    for (const SvdResult& s : spectra)
        if (s.spectrum_size() != p) throw DataError("select_m: inhomogeneous spectrum sizes");

    SelectMResult result;
    std::vector<int> first_crossing;
    first_crossing.reserve(spectra.size());
    for (const SvdResult& s : spectra) {
        if (s.values.empty() || s.values.front() <= 0.0) {
            ++result.skipped_zero;
            continue;
        }
        const double cutoff = alpha * s.values.front();
        int idx = p + 1;
        for (int i = 0; i < p; ++i) {
            if (s.values[i] <= cutoff) {
                idx = i + 1;
                break;
            }
        }
        first_crossing.push_back(idx);
    }
    if (first_crossing.empty()) throw DataError("select_m: every spectrum is all-zero");

    // counting pass: cumulative histogram of first crossings
    std::vector<int> count(p + 2, 0);
    for (int idx : first_crossing) ++count[idx];
    const double need = coverage * static_cast<double>(first_crossing.size());
    int covered = 0;
    for (int m = 1; m <= p; ++m) {
        covered += count[m];
        if (static_cast<double>(covered) >= need) {
            result.m = m;
            return result;
        }
    }
    throw DataError("select_m: calibration impossible at alpha = " + fmt_g17(alpha) +
                    " (coverage not reachable within P)");
}

struct CalibrateOptions {
    double alpha = 0.01;
    double percentile_lo = 5.0;
    double percentile_hi = 95.0;
    double coverage = 0.95;
    int min_train = 100;
    std::string dataset_label = "unnamed";
};

namespace detail {

/// Nearest-rank percentile: 1-based index ceil(p/100 * n) of the ascending sort.
inline double nearest_rank(const std::vector<double>& ascending, double p) {
    const std::size_t n = ascending.size();
    std::size_t rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
    if (rank < 1) rank = 1;
    if (rank > n) rank = n;
    return ascending[rank - 1];
}

} // namespace detail

/// Three-step calibration: per-image spectra, cutoff index m, then the
/// percentile thresholds of the tail-energy distribution.
inline CalibrationProfile calibrate(const std::vector<Image>& train,
                                    const CalibrateOptions& opt = {}) {
    if (static_cast<int>(train.size()) < opt.min_train)
        throw DataError("calibrate: need at least " + std::to_string(opt.min_train) +
                        " training images, got " + std::to_string(train.size()));
    const Image& first = train.front();
    for (const Image& img : train)
        if (img.rows != first.rows || img.cols != first.cols || img.channels != first.channels)
            throw DataError("calibrate: heterogeneous image dimensions");

    std::vector<SvdResult> spectra;
    spectra.reserve(train.size());
    for (const Image& img : train) spectra.push_back(compute_svd(to_image_matrix(img)));

    const SelectMResult sel = select_m(spectra, opt.alpha, opt.coverage);

    std::vector<double> rhos;
    rhos.reserve(spectra.size());
    for (const SvdResult& s : spectra) {
        if (s.values.empty() || s.values.front() <= 0.0) continue;  // skipped in select_m too
        rhos.push_back(rho(s, sel.m));
    }
    std::sort(rhos.begin(), rhos.end());

    CalibrationProfile p;
    p.dataset_label = opt.dataset_label;
    p.alpha = opt.alpha;
    p.m = sel.m;
    p.lower = detail::nearest_rank(rhos, opt.percentile_lo);
    p.upper = detail::nearest_rank(rhos, opt.percentile_hi);
    p.rows = first.rows;
    p.cols = first.cols;
    p.channels = first.channels;
    p.spectrum_size = first.channels * std::min(first.rows, first.cols);
    p.percentile_lo = opt.percentile_lo;
    p.percentile_hi = opt.percentile_hi;
    p.train_size = static_cast<int>(train.size());
    validate_profile(p);
    return p;
}

/// Clean iff L <= rho <= U, boundaries inclusive.
inline Verdict verdict_for(double rho_value, const CalibrationProfile& p) {
    Verdict v;
    v.rho = rho_value;
    v.label = (rho_value >= p.lower && rho_value <= p.upper) ? Label::Clean : Label::Adversarial;
    v.profile_id = p.dataset_label;
    return v;
}

inline Verdict classify_matrix(const ImageMatrix& x, const CalibrationProfile& p) {
    if (x.rows() != p.rows || x.cols() != p.cols || x.channels() != p.channels)
        throw DataError("classify: image dimensions do not match profile");
    return verdict_for(rho(compute_svd(x), p.m), p);
}

inline Verdict classify(const Image& img, const CalibrationProfile& p) {
    return classify_matrix(to_image_matrix(img), p);
}

struct DetectionRow {
    int image_id = 0;
    double rho = 0.0;
    bool flagged = false;           // detector says adversarial
    bool truth_adversarial = false; // ground truth
};

struct DetectionReport {
    int total_clean = 0;
    int flagged_clean = 0;
    int total_adversarial = 0;
    int flagged_adversarial = 0;
    double detection_rate = 0.0;     // flagged adversarial / total adversarial
    double false_positive_rate = 0.0;  // flagged clean / total clean
    std::vector<DetectionRow> rows;
};

inline DetectionReport evaluate(const std::vector<Image>& clean,
                                const std::vector<Image>& adversarial,
                                const CalibrationProfile& p) {
    if (clean.empty() || adversarial.empty())
        throw DataError("evaluate: clean and adversarial sets must be nonempty");
    DetectionReport rep;
    int id = 0;
    for (const Image& img : clean) {
        const Verdict v = classify(img, p);
        const bool flagged = v.label == Label::Adversarial;
        rep.rows.push_back({id++, v.rho, flagged, false});
        ++rep.total_clean;
        if (flagged) ++rep.flagged_clean;
    }
    for (const Image& img : adversarial) {
        const Verdict v = classify(img, p);
        const bool flagged = v.label == Label::Adversarial;
        rep.rows.push_back({id++, v.rho, flagged, true});
        ++rep.total_adversarial;
        if (flagged) ++rep.flagged_adversarial;
    }
    rep.detection_rate =
        static_cast<double>(rep.flagged_adversarial) / static_cast<double>(rep.total_adversarial);
    rep.false_positive_rate =
        static_cast<double>(rep.flagged_clean) / static_cast<double>(rep.total_clean);
    return rep;
}

inline std::string detection_report_csv(const DetectionReport& rep) {
    std::string out = "image_id,rho,verdict,truth\n";
    for (const DetectionRow& r : rep.rows) {
        out += std::to_string(r.image_id) + ',' + fmt_g17(r.rho) + ',' +
               (r.flagged ? "adversarial" : "clean") + ',' +
               (r.truth_adversarial ? "adversarial" : "clean") + "\n";
    }
    return out;
}

// ---- profile persistence: line-oriented UTF-8 "key = value" ----

inline void save_profile(const CalibrationProfile& p, const std::string& path) {
    validate_profile(p);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("save_profile: cannot open " + path);
    out << "version = " << p.version << "\n"
        << "dataset_label = " << p.dataset_label << "\n"
        << "alpha = " << fmt_g17(p.alpha) << "\n"
        << "m = " << p.m << "\n"
        << "L = " << fmt_g17(p.lower) << "\n"
        << "U = " << fmt_g17(p.upper) << "\n"
        << "P = " << p.spectrum_size << "\n"
        << "M = " << p.rows << "\n"
        << "N = " << p.cols << "\n"
        << "K = " << p.channels << "\n"
        << "percentile_lo = " << fmt_g17(p.percentile_lo) << "\n"
        << "percentile_hi = " << fmt_g17(p.percentile_hi) << "\n"
        << "train_size = " << p.train_size << "\n";
    if (!out) throw DataError("save_profile: write failed for " + path);
}

inline CalibrationProfile load_profile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_profile: cannot open " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto sep = line.find(" = ");
        if (sep == std::string::npos)
            throw DataError("load_profile: malformed line " + std::to_string(lineno));
        const std::string key = line.substr(0, sep);
        const std::string value = line.substr(sep + 3);
        if (!kv.emplace(key, value).second)
            throw DataError("load_profile: duplicate key '" + key + "'");
    }

    static const char* expected[] = {"version", "dataset_label", "alpha", "m", "L", "U", "P",
                                     "M", "N", "K", "percentile_lo", "percentile_hi", "train_size"};
    for (const auto& [key, value] : kv) {
        bool known = false;
        for (const char* e : expected) known |= key == e;
        if (!known) throw DataError("load_profile: unknown key '" + key + "'");
    }
    for (const char* e : expected)
        if (!kv.count(e)) throw DataError("load_profile: missing key '" + std::string(e) + "'");

    auto as_int = [&](const char* key) {
        try {
            std::size_t pos = 0;
            const int v = std::stoi(kv[key], &pos);
            if (pos != kv[key].size()) throw std::invalid_argument(key);
            return v;
        } catch (const std::exception&) {
            throw DataError("load_profile: bad integer for '" + std::string(key) + "'");
        }
    };
    auto as_double = [&](const char* key) {
        try {
            std::size_t pos = 0;
            const double v = std::stod(kv[key], &pos);
            if (pos != kv[key].size()) throw std::invalid_argument(key);
            return v;
        } catch (const std::exception&) {
            throw DataError("load_profile: bad number for '" + std::string(key) + "'");
        }
    };

    CalibrationProfile p;
    p.version = as_int("version");
    if (p.version != 1)
        throw DataError("load_profile: unsupported version " + std::to_string(p.version));
    p.dataset_label = kv["dataset_label"];
    p.alpha = as_double("alpha");
    p.m = as_int("m");
    p.lower = as_double("L");
    p.upper = as_double("U");
    p.spectrum_size = as_int("P");
    p.rows = as_int("M");
    p.cols = as_int("N");
    p.channels = as_int("K");
    p.percentile_lo = as_double("percentile_lo");
    p.percentile_hi = as_double("percentile_hi");
    p.train_size = as_int("train_size");
    validate_profile(p);
    return p;
}

} // namespace specdet
