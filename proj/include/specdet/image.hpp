#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "specdet/matrix.hpp"
#include "specdet/rng.hpp"

namespace specdet {

/// An image with pixels normalized to [0,1], stored row-major, channel-last.
/// Pixel (i, j, k) lives at ((i * cols) + j) * channels + k.
struct Image {
    int rows = 0;
    int cols = 0;
    int channels = 0;
    std::vector<double> pixels;

    std::size_t pixel_count() const {
        return static_cast<std::size_t>(rows) * cols * channels;
    }

    double at(int i, int j, int k) const {
        return pixels[(static_cast<std::size_t>(i) * cols + j) * channels + k];
    }
    double& at(int i, int j, int k) {
        return pixels[(static_cast<std::size_t>(i) * cols + j) * channels + k];
    }

    friend bool operator==(const Image& a, const Image& b) {
        return a.rows == b.rows && a.cols == b.cols && a.channels == b.channels &&
               a.pixels == b.pixels;
    }
};

inline void validate_image(const Image& img) {
    if (img.rows < 1 || img.cols < 1 || img.channels < 1)
        throw std::invalid_argument("Image: dimensions must be positive");
    if (img.pixels.size() != img.pixel_count())
        throw std::invalid_argument("Image: pixel count does not match dimensions");
    for (double v : img.pixels)
        if (!(v >= 0.0 && v <= 1.0))
            throw std::invalid_argument("Image: pixel outside [0,1]");
}

/// The block-diagonal view of an image: one dense block per channel. The
/// (rows*K) x (cols*K) dense form is a conceptual identity only; blocks are
/// all that is ever stored or factored.
struct ImageMatrix {
    std::vector<Matrix> blocks;

    int rows() const { return blocks.empty() ? 0 : blocks.front().rows(); }
    int cols() const { return blocks.empty() ? 0 : blocks.front().cols(); }
    int channels() const { return static_cast<int>(blocks.size()); }

    bool same_dims(const ImageMatrix& o) const {
        return channels() == o.channels() && rows() == o.rows() && cols() == o.cols();
    }

    friend bool operator==(const ImageMatrix& a, const ImageMatrix& b) {
        return a.blocks == b.blocks;
    }
};

/// Additive block-diagonal perturbation; same block layout as the matrix it
/// perturbs. strength_max is the max-norm of the perturbation.
struct Perturbation {
    std::vector<Matrix> blocks;
    double strength_max = 0.0;
};

inline Perturbation make_perturbation(std::vector<Matrix> blocks) {
    Perturbation e;
    e.strength_max = 0.0;
    for (const Matrix& b : blocks) e.strength_max = std::max(e.strength_max, max_abs(b));
    e.blocks = std::move(blocks);
    return e;
}

/// Difference x_hat - x as a Perturbation.
inline Perturbation perturbation_between(const ImageMatrix& x, const ImageMatrix& x_hat) {
    if (!x.same_dims(x_hat))
        throw std::invalid_argument("perturbation_between: dimension mismatch");
    std::vector<Matrix> diff;
    diff.reserve(x.blocks.size());
    for (std::size_t k = 0; k < x.blocks.size(); ++k)
        diff.push_back(x_hat.blocks[k] - x.blocks[k]);
    return make_perturbation(std::move(diff));
}

/// One orthonormal factor pair (P1, Q1), applied identically to every
/// channel block: block -> left * block * right^T.
struct RotationPair {
    Matrix left;   // M x M
    Matrix right;  // N x N
};

inline ImageMatrix to_image_matrix(const Image& img) {
    ImageMatrix m;
    m.blocks.reserve(img.channels);
    for (int k = 0; k < img.channels; ++k) {
        Matrix block(img.rows, img.cols);
        for (int i = 0; i < img.rows; ++i)
            for (int j = 0; j < img.cols; ++j) block(i, j) = img.at(i, j, k);
        m.blocks.push_back(std::move(block));
    }
    return m;
}

/// Inverse of to_image_matrix. Entries must already lie in [0,1]; matrices
/// produced by attacks or truncation go through to_image_clamped instead.
inline Image to_image(const ImageMatrix& m) {
    Image img;
    img.rows = m.rows();
    img.cols = m.cols();
    img.channels = m.channels();
    img.pixels.resize(img.pixel_count());
    for (int k = 0; k < img.channels; ++k)
        for (int i = 0; i < img.rows; ++i)
            for (int j = 0; j < img.cols; ++j) img.at(i, j, k) = m.blocks[k](i, j);
    validate_image(img);
    return img;
}

inline Image to_image_clamped(const ImageMatrix& m) {
    Image img;
    img.rows = m.rows();
    img.cols = m.cols();
    img.channels = m.channels();
    img.pixels.resize(img.pixel_count());
    for (int k = 0; k < img.channels; ++k)
        for (int i = 0; i < img.rows; ++i)
            for (int j = 0; j < img.cols; ++j)
                img.at(i, j, k) = std::clamp(m.blocks[k](i, j), 0.0, 1.0);
    return img;
}

/// X + E, blockwise. No clipping: the result is a matrix, not an image.
inline ImageMatrix apply_perturbation(const ImageMatrix& x, const Perturbation& e) {
    if (x.blocks.size() != e.blocks.size())
        throw std::invalid_argument("apply_perturbation: channel count mismatch");
    ImageMatrix out = x;
    for (std::size_t k = 0; k < out.blocks.size(); ++k) {
        if (!out.blocks[k].same_shape(e.blocks[k]))
            throw std::invalid_argument("apply_perturbation: block shape mismatch");
        out.blocks[k] += e.blocks[k];
    }
    return out;
}

/// ||X||_F over all blocks (off-block zeros contribute nothing).
inline double norm_frobenius(const ImageMatrix& x) {
    double sum = 0.0;
    for (const Matrix& b : x.blocks)
        for (double v : b.data()) sum += v * v;
    return std::sqrt(sum);
}

/// ||X||_max = largest |entry| over all blocks.
inline double norm_max(const ImageMatrix& x) {
    double best = 0.0;
    for (const Matrix& b : x.blocks) best = std::max(best, max_abs(b));
    return best;
}

inline ImageMatrix rotate(const ImageMatrix& x, const RotationPair& r) {
    if (r.left.rows() != x.rows() || r.left.cols() != x.rows() ||
        r.right.rows() != x.cols() || r.right.cols() != x.cols())
        throw std::invalid_argument("rotate: rotation dimensions do not match matrix");
    ImageMatrix out;
    out.blocks.reserve(x.blocks.size());
    const Matrix right_t = r.right.transposed();
    for (const Matrix& b : x.blocks) out.blocks.push_back(matmul(matmul(r.left, b), right_t));
    return out;
}

namespace detail {

/// Orthonormalize the columns of a square matrix in place with modified
/// Gram-Schmidt, two passes per column. Gaussian input is well conditioned,
/// so residuals land near machine epsilon.
inline void mgs_orthonormalize(Matrix& a) {
    const int n = a.cols();
    for (int j = 0; j < n; ++j) {
        for (int pass = 0; pass < 2; ++pass) {
            for (int p = 0; p < j; ++p) {
                const double proj = column_dot(a, p, j);
                for (int i = 0; i < n; ++i) a(i, j) -= proj * a(i, p);
            }
        }
        double norm = 0.0;
        for (int i = 0; i < n; ++i) norm += a(i, j) * a(i, j);
        norm = std::sqrt(norm);
        if (norm == 0.0) {
            // degenerate draw; fall back to a canonical axis
            a(j % n, j) = 1.0;
            norm = 1.0;
        }
        for (int i = 0; i < n; ++i) a(i, j) /= norm;
    }
}

inline Matrix random_orthonormal(int n, Rng& rng) {
    Matrix a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
    mgs_orthonormalize(a);
    return a;
}

} // namespace detail

/// Seeded random rotation pair; both factors orthonormal to ~1e-14.
inline RotationPair random_rotation(int m, int n, std::uint64_t seed) {
    if (m < 1 || n < 1) throw std::invalid_argument("random_rotation: dimensions must be >= 1");
    Rng rng(mix_seed(seed, 0x526f74ull));  // distinct stream per purpose
    RotationPair r;
    r.left = detail::random_orthonormal(m, rng);
    r.right = detail::random_orthonormal(n, rng);
    return r;
}

/// Max |Q^T Q - I| entry; 0 for an exactly orthonormal factor.
inline double orthonormality_residual(const Matrix& q) {
    const Matrix g = matmul(q.transposed(), q);
    double worst = 0.0;
    for (int i = 0; i < g.rows(); ++i)
        for (int j = 0; j < g.cols(); ++j)
            worst = std::max(worst, std::abs(g(i, j) - (i == j ? 1.0 : 0.0)));
    return worst;
}

} // namespace specdet
