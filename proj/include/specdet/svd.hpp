#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "specdet/errors.hpp"
#include "specdet/image.hpp"
#include "specdet/matrix.hpp"

namespace specdet {

/// Thin SVD of one dense block: a = u * diag(s) * v^T with s descending,
/// u (m x p), v (n x p), p = min(m, n).
struct MatrixSvd {
    std::vector<double> s;
    Matrix u;
    Matrix v;
};

namespace detail {

constexpr int kJacobiMaxSweeps = 100;

/// One-sided (Hestenes) Jacobi on an m x n matrix with m >= n: rotate column
/// pairs until they are mutually orthogonal, accumulating the rotations in v.
/// Deterministic sweep order; relative off-diagonal tolerance near machine
/// epsilon so orthonormality residuals land well under 1e-10.
inline bool hestenes_sweep_converge(Matrix& w, Matrix& v) {
    const int n = w.cols();
    // the computed column dot of orthogonal columns carries up to ~rows*eps
    // relative noise; anything tighter than that never settles
    const double tol = 4.0 * std::max(w.rows(), n) * std::numeric_limits<double>::epsilon();
    // columns this far below the matrix scale are rounding dust; chop them
    // before their denormal arithmetic stalls the sweeps
    double fro2 = 0.0;
    for (double x : w.data()) fro2 += x * x;
    const double dead2 = fro2 * 1e-300;
    auto chop_if_dead = [&](int col, double norm2) {
        if (norm2 > dead2 || norm2 == 0.0) return false;
        for (int i = 0; i < w.rows(); ++i) w(i, col) = 0.0;
        return true;
    };
    for (int sweep = 0; sweep < kJacobiMaxSweeps; ++sweep) {
        bool rotated = false;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double app = column_dot(w, p, p);
                const double aqq = column_dot(w, q, q);
                if (chop_if_dead(p, app) | chop_if_dead(q, aqq)) continue;
                if (app == 0.0 || aqq == 0.0) continue;
                const double apq = column_dot(w, p, q);
                if (std::abs(apq) <= tol * std::sqrt(app * aqq)) continue;
                rotated = true;
                const double zeta = (aqq - app) / (2.0 * apq);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (int i = 0; i < w.rows(); ++i) {
                    const double wp = w(i, p), wq = w(i, q);
                    w(i, p) = c * wp - s * wq;
                    w(i, q) = s * wp + c * wq;
                }
                for (int i = 0; i < v.rows(); ++i) {
                    const double vp = v(i, p), vq = v(i, q);
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
            }
        }
        if (!rotated) return true;
    }
    return false;
}

/// Replace left vectors of numerically null columns with a deterministic
/// completion of the orthonormal basis: for each null slot, orthogonalize
/// every canonical axis against the filled columns and keep the axis with
/// the largest residual (always at least 1/sqrt(m) in norm).
inline void complete_null_left_vectors(Matrix& u, const std::vector<double>& s, double s_max) {
    const int m = u.rows();
    const int p = u.cols();
    const double null_tol = s_max > 0.0 ? s_max * 1e-15 : 0.0;
    for (int j = 0; j < p; ++j) {
        if (s[j] > null_tol) continue;
        std::vector<double> best;
        double best_norm = -1.0;
        for (int candidate = 0; candidate < m; ++candidate) {
            std::vector<double> e(m, 0.0);
            e[candidate] = 1.0;
            for (int pass = 0; pass < 2; ++pass) {
                for (int c = 0; c < p; ++c) {
                    if (c == j) continue;
                    if (s[c] <= null_tol && c > j) continue;  // not yet filled
                    double proj = 0.0;
                    for (int i = 0; i < m; ++i) proj += e[i] * u(i, c);
                    for (int i = 0; i < m; ++i) e[i] -= proj * u(i, c);
                }
            }
            double norm = 0.0;
            for (double x : e) norm += x * x;
            norm = std::sqrt(norm);
            if (norm > best_norm) {
                best_norm = norm;
                best = std::move(e);
            }
            if (best_norm > 0.7) break;  // good enough, keep the scan cheap
        }
        if (best_norm <= 0.0)
            throw NumericalError("svd: failed to complete orthonormal basis");
        for (int i = 0; i < m; ++i) u(i, j) = best[i] / best_norm;
    }
}

} // namespace detail

/// SVD of a single dense matrix via one-sided Jacobi. Throws NumericalError
/// if the sweep budget is exhausted.
inline MatrixSvd jacobi_svd(const Matrix& a) {
    const bool transposed = a.rows() < a.cols();
    Matrix w = transposed ? a.transposed() : a;
    const int m = w.rows();
    const int n = w.cols();
    Matrix v = Matrix::identity(n);

    if (!detail::hestenes_sweep_converge(w, v))
        throw NumericalError("svd: Jacobi sweeps did not converge within " +
                             std::to_string(detail::kJacobiMaxSweeps) + " sweeps");

    std::vector<double> s(n);
    for (int j = 0; j < n; ++j) s[j] = std::sqrt(std::max(0.0, column_dot(w, j, j)));

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return s[i] > s[j]; });

    MatrixSvd out;
    out.s.resize(n);
    out.u = Matrix(m, n);
    out.v = Matrix(n, n);
    const double s_max = n > 0 ? s[order[0]] : 0.0;
    const double null_tol = s_max > 0.0 ? s_max * 1e-15 : 0.0;
    for (int j = 0; j < n; ++j) {
        const int src = order[j];
        out.s[j] = s[src];
        if (s[src] > null_tol) {
            for (int i = 0; i < m; ++i) out.u(i, j) = w(i, src) / s[src];
        }
        for (int i = 0; i < n; ++i) out.v(i, j) = v(i, src);
    }
    detail::complete_null_left_vectors(out.u, out.s, s_max);

    if (transposed) std::swap(out.u, out.v);

    // sign convention: largest-magnitude component of each left vector >= 0
    for (int j = 0; j < static_cast<int>(out.s.size()); ++j) {
        int arg = 0;
        double best = -1.0;
        for (int i = 0; i < out.u.rows(); ++i) {
            const double mag = std::abs(out.u(i, j));
            if (mag > best) {
                best = mag;
                arg = i;
            }
        }
        if (out.u(arg, j) < 0.0) {
            for (int i = 0; i < out.u.rows(); ++i) out.u(i, j) = -out.u(i, j);
            for (int i = 0; i < out.v.rows(); ++i) out.v(i, j) = -out.v(i, j);
        }
    }
    return out;
}

/// Merged singular spectrum of a block-diagonal image matrix. Per-channel
/// factorizations are merged into one descending list; each triple keeps its
/// channel of origin so vectors stay block-local.
struct SvdResult {
    std::vector<double> values;              // descending, length P = K*min(M,N)
    std::vector<std::vector<double>> left;   // left[i]: M-vector in channel channel_of[i]
    std::vector<std::vector<double>> right;  // right[i]: N-vector
    std::vector<int> channel_of;             // triple index -> channel
    int rows = 0;                            // M
    int cols = 0;                            // N
    int channels = 0;                        // K

    int spectrum_size() const { return static_cast<int>(values.size()); }
};

inline SvdResult compute_svd(const ImageMatrix& x) {
    SvdResult r;
    r.rows = x.rows();
    r.cols = x.cols();
    r.channels = x.channels();
    const int p_block = std::min(r.rows, r.cols);
    const int p_total = p_block * r.channels;

    struct Entry {
        double s;
        int channel;
        int index;
    };
    std::vector<Entry> entries;
    entries.reserve(p_total);
    std::vector<MatrixSvd> per_channel;
    per_channel.reserve(r.channels);
    for (int k = 0; k < r.channels; ++k) {
        try {
            per_channel.push_back(jacobi_svd(x.blocks[k]));
        } catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) + " (channel " + std::to_string(k) + ")");
        }
        for (int i = 0; i < p_block; ++i) entries.push_back({per_channel[k].s[i], k, i});
    }

    // descending by value; ties resolved by (channel, within-channel index),
    // which stable_sort preserves from construction order
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Entry& a, const Entry& b) { return a.s > b.s; });

    r.values.reserve(p_total);
    r.left.reserve(p_total);
    r.right.reserve(p_total);
    r.channel_of.reserve(p_total);
    for (const Entry& e : entries) {
        const MatrixSvd& f = per_channel[e.channel];
        std::vector<double> u(r.rows), v(r.cols);
        for (int i = 0; i < r.rows; ++i) u[i] = f.u(i, e.index);
        for (int i = 0; i < r.cols; ++i) v[i] = f.v(i, e.index);
        r.values.push_back(e.s);
        r.left.push_back(std::move(u));
        r.right.push_back(std::move(v));
        r.channel_of.push_back(e.channel);
    }
    return r;
}

/// Sum of the top k triples as a block matrix (k = P reassembles the input).
inline ImageMatrix truncate(const SvdResult& svd, int k) {
    if (k < 0 || k > svd.spectrum_size())
        throw std::out_of_range("truncate: k out of range [0, P]");
    ImageMatrix out;
    out.blocks.assign(svd.channels, Matrix(svd.rows, svd.cols));
    for (int t = 0; t < k; ++t) {
        Matrix& block = out.blocks[svd.channel_of[t]];
        const double s = svd.values[t];
        const std::vector<double>& u = svd.left[t];
        const std::vector<double>& v = svd.right[t];
        for (int i = 0; i < svd.rows; ++i) {
            const double su = s * u[i];
            if (su == 0.0) continue;
            for (int j = 0; j < svd.cols; ++j) block(i, j) += su * v[j];
        }
    }
    return out;
}

inline ImageMatrix reconstruct(const SvdResult& svd) { return truncate(svd, svd.spectrum_size()); }

/// Fraction of squared-spectrum energy captured by the top k values.
inline double energy_fraction(const SvdResult& svd, int k) {
    if (k < 1 || k > svd.spectrum_size())
        throw std::out_of_range("energy_fraction: k out of range [1, P]");
    double head = 0.0, total = 0.0;
    for (int i = 0; i < svd.spectrum_size(); ++i) {
        const double sq = svd.values[i] * svd.values[i];
        if (i < k) head += sq;
        total += sq;
    }
    if (total == 0.0)
        throw NumericalError("energy_fraction: all-zero spectrum");
    return head / total;
}

/// sin of the principal angle between two unit vectors, sign-invariant.
inline double subspace_angle_sin(const std::vector<double>& u, const std::vector<double>& u_hat) {
    if (u.size() != u_hat.size())
        throw std::invalid_argument("subspace_angle_sin: length mismatch");
    double dot = 0.0, nu = 0.0, nh = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * u_hat[i];
        nu += u[i] * u[i];
        nh += u_hat[i] * u_hat[i];
    }
    if (nu == 0.0 || nh == 0.0)
        throw std::invalid_argument("subspace_angle_sin: zero-norm input");
    const double cos2 = (dot * dot) / (nu * nh);
    return std::sqrt(std::max(0.0, 1.0 - cos2));
}

/// ||X||_2 = largest singular value across blocks.
inline double norm_2(const ImageMatrix& x) {
    double best = 0.0;
    for (const Matrix& b : x.blocks) {
        const MatrixSvd f = jacobi_svd(b);
        if (!f.s.empty()) best = std::max(best, f.s.front());
    }
    return best;
}

/// The four norm orderings every block matrix satisfies; values are reported
/// so violations can be inspected rather than just counted.
struct NormInequalityReport {
    double norm2 = 0.0;
    double frob = 0.0;
    double maxn = 0.0;
    int p = 0;            // K * min(M,N)
    double dense_rows = 0; // M*K
    double dense_cols = 0; // N*K
    bool two_le_frob = false;
    bool frob_le_sqrtp_two = false;
    bool max_le_two = false;
    bool two_le_sqrtmn_max = false;

    bool all_hold() const {
        return two_le_frob && frob_le_sqrtp_two && max_le_two && two_le_sqrtmn_max;
    }
};

inline NormInequalityReport check_norm_inequalities(const ImageMatrix& x) {
    constexpr double slack = 1e-9;
    NormInequalityReport r;
    r.norm2 = norm_2(x);
    r.frob = norm_frobenius(x);
    r.maxn = norm_max(x);
    r.p = x.channels() * std::min(x.rows(), x.cols());
    r.dense_rows = static_cast<double>(x.rows()) * x.channels();
    r.dense_cols = static_cast<double>(x.cols()) * x.channels();
    r.two_le_frob = r.norm2 <= r.frob + slack;
    r.frob_le_sqrtp_two = r.frob <= std::sqrt(static_cast<double>(r.p)) * r.norm2 + slack;
    r.max_le_two = r.maxn <= r.norm2 + slack;
    r.two_le_sqrtmn_max = r.norm2 <= std::sqrt(r.dense_rows * r.dense_cols) * r.maxn + slack;
    return r;
}

} // namespace specdet
