#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "specdet/format.hpp"
#include "specdet/image.hpp"
#include "specdet/svd.hpp"

namespace specdet {

/// Per-value margins of the Weyl bound |s_i - s_hat_i| <= ||E||_2.
/// Nonnegative margins (up to rounding) certify the bound.
inline std::vector<double> weyl_check(const std::vector<double>& s,
                                      const std::vector<double>& s_hat, double e_norm2) {
    if (s.size() != s_hat.size()) throw std::invalid_argument("weyl_check: length mismatch");
    std::vector<double> margins(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) margins[i] = e_norm2 - std::abs(s[i] - s_hat[i]);
    return margins;
}

struct MirskyResult {
    double lhs = 0.0;  // sqrt(sum (s_i - s_hat_i)^2)
    double rhs = 0.0;  // ||E||_F
    bool ok = false;   // lhs <= rhs + 1e-9
};

inline MirskyResult mirsky_check(const std::vector<double>& s, const std::vector<double>& s_hat,
                                 double e_norm_f) {
    if (s.size() != s_hat.size()) throw std::invalid_argument("mirsky_check: length mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double d = s[i] - s_hat[i];
        sum += d * d;
    }
    MirskyResult r;
    r.lhs = std::sqrt(sum);
    r.rhs = e_norm_f;
    r.ok = r.lhs <= r.rhs + 1e-9;
    return r;
}

/// First-order prediction of the perturbed spectrum:
/// s_hat_i ~= s_i + u_i^T E v_i, evaluated in the channel of triple i.
inline std::vector<double> first_order_estimate(const SvdResult& svd, const Perturbation& e) {
    if (static_cast<int>(e.blocks.size()) != svd.channels)
        throw std::invalid_argument("first_order_estimate: channel count mismatch");
    for (const Matrix& b : e.blocks)
        if (b.rows() != svd.rows || b.cols() != svd.cols)
            throw std::invalid_argument("first_order_estimate: block shape mismatch");
    std::vector<double> predicted(svd.values.size());
    for (std::size_t t = 0; t < svd.values.size(); ++t) {
        const Matrix& eb = e.blocks[svd.channel_of[t]];
        const std::vector<double>& u = svd.left[t];
        const std::vector<double>& v = svd.right[t];
        double quad = 0.0;
        for (int i = 0; i < svd.rows; ++i) {
            if (u[i] == 0.0) continue;
            double row = 0.0;
            for (int j = 0; j < svd.cols; ++j) row += eb(i, j) * v[j];
            quad += u[i] * row;
        }
        predicted[t] = svd.values[t] + quad;
    }
    return predicted;
}

/// Wedin-style singular-vector bound 2||E|| / gap_i on the merged spectrum,
/// where gap_i is the isolation of s_i: the distance to its nearest neighbor
/// and to the spectrum's reflection at zero (s_i itself), which is what
/// actually controls subspace rotation. `index` is 1-based to match spectrum
/// positions; boundary indices use their single existing neighbor. Zero gap
/// gives +inf.
inline double wedin_bound(const SvdResult& svd, int index, double e_norm2) {
    const int p = svd.spectrum_size();
    if (index < 1 || index > p) throw std::out_of_range("wedin_bound: index out of range");
    const int i = index - 1;
    double gap = svd.values[i];  // distance to the zero block / reflected spectrum
    if (i + 1 < p) gap = std::min(gap, std::abs(svd.values[i] - svd.values[i + 1]));
    if (i - 1 >= 0) gap = std::min(gap, std::abs(svd.values[i] - svd.values[i - 1]));
    if (gap == 0.0) {
        if (e_norm2 == 0.0) return 0.0;
        return std::numeric_limits<double>::infinity();
    }
    return 2.0 * e_norm2 / gap;
}

/// One merged-spectrum position of a clean/perturbed comparison.
struct PerturbationRecord {
    int index = 0;  // 1-based spectrum position
    int channel = -1;
    double value = 0.0;        // s_i of X
    double value_hat = 0.0;    // s_i of X_hat at the same merged position
    double rel_change = 0.0;   // |s_hat - s| / max(s, 1e-12)
    double left_angle_sin = 0.0;
    double right_angle_sin = 0.0;
    double wedin = 0.0;        // may be +inf
    double weyl_margin = 0.0;  // ||E||_2 - |s - s_hat|
    double first_order_residual = 0.0;
    bool crossed = false;      // merged position changed channel under E
};

struct PerturbationReport {
    std::vector<PerturbationRecord> records;
    double e_norm2 = 0.0;
    double e_norm_f = 0.0;
    double mirsky_lhs = 0.0;
    double mirsky_rhs = 0.0;
    int violations = 0;  // Weyl margins below -1e-9 plus a failed Mirsky bound
};

/// Full spectral comparison of a matrix and its perturbed counterpart.
inline PerturbationReport perturbation_report(const ImageMatrix& x, const ImageMatrix& x_hat) {
    if (!x.same_dims(x_hat))
        throw std::invalid_argument("perturbation_report: dimension mismatch");

    const SvdResult svd_x = compute_svd(x);
    const SvdResult svd_hat = compute_svd(x_hat);
    const Perturbation e = perturbation_between(x, x_hat);

    PerturbationReport rep;
    rep.e_norm2 = norm_2(ImageMatrix{e.blocks});
    rep.e_norm_f = norm_frobenius(ImageMatrix{e.blocks});

    const std::vector<double> predicted = first_order_estimate(svd_x, e);
    const MirskyResult mirsky = mirsky_check(svd_x.values, svd_hat.values, rep.e_norm_f);
    rep.mirsky_lhs = mirsky.lhs;
    rep.mirsky_rhs = mirsky.rhs;
    if (!mirsky.ok) ++rep.violations;

    const std::vector<double> margins = weyl_check(svd_x.values, svd_hat.values, rep.e_norm2);

    rep.records.reserve(svd_x.values.size());
    for (int t = 0; t < svd_x.spectrum_size(); ++t) {
        PerturbationRecord rec;
        rec.index = t + 1;
        rec.channel = svd_x.channel_of[t];
        rec.value = svd_x.values[t];
        rec.value_hat = svd_hat.values[t];
        rec.rel_change = std::abs(rec.value_hat - rec.value) / std::max(rec.value, 1e-12);
        rec.crossed = svd_hat.channel_of[t] != svd_x.channel_of[t];
        if (!rec.crossed) {
            rec.left_angle_sin = subspace_angle_sin(svd_x.left[t], svd_hat.left[t]);
            rec.right_angle_sin = subspace_angle_sin(svd_x.right[t], svd_hat.right[t]);
        } else {
            // vectors live in different blocks of the dense form: orthogonal
            rec.left_angle_sin = 1.0;
            rec.right_angle_sin = 1.0;
        }
        rec.wedin = wedin_bound(svd_x, rec.index, rep.e_norm2);
        rec.weyl_margin = margins[t];
        if (rec.weyl_margin < -1e-9) ++rep.violations;
        rec.first_order_residual = std::abs(rec.value_hat - predicted[t]);
        rep.records.push_back(rec);
    }
    return rep;
}

inline std::string perturbation_report_csv_header() {
    return "index,channel,value,value_hat,rel_change,left_angle_sin,right_angle_sin,"
           "wedin_bound,weyl_margin,first_order_residual,crossed";
}

inline std::string to_csv(const PerturbationReport& rep) {
    std::string out = perturbation_report_csv_header() + "\n";
    for (const PerturbationRecord& r : rep.records) {
        out += std::to_string(r.index) + ',' + std::to_string(r.channel) + ',' +
               fmt_g17(r.value) + ',' + fmt_g17(r.value_hat) + ',' + fmt_g17(r.rel_change) + ',' +
               fmt_g17(r.left_angle_sin) + ',' + fmt_g17(r.right_angle_sin) + ',' +
               fmt_g17(r.wedin) + ',' + fmt_g17(r.weyl_margin) + ',' +
               fmt_g17(r.first_order_residual) + ',' + (r.crossed ? "1" : "0") + "\n";
    }
    return out;
}

} // namespace specdet
