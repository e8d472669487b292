#pragma once

// Deterministic stand-in corpora for runs where the real datasets are not on
// disk. Digit images mimic MNIST's structure (dark background, a few bright
// smooth strokes, 8-bit quantization at write time); texture images mimic
// CIFAR-10's (dense low-frequency color content with a noise floor). Both
// are written through the canonical binary writers so every consumer goes
// through the production parsers.

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "specdet/dataset.hpp"
#include "specdet/image.hpp"
#include "specdet/rng.hpp"

namespace synth {

using specdet::Image;
using specdet::Rng;

struct Point {
    double x, y;
};

namespace detail {

inline double dist_to_segment(double px, double py, Point a, Point b) {
    const double vx = b.x - a.x, vy = b.y - a.y;
    const double wx = px - a.x, wy = py - a.y;
    const double vv = vx * vx + vy * vy;
    double t = vv > 0.0 ? (wx * vx + wy * vy) / vv : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = px - (a.x + t * vx), dy = py - (a.y + t * vy);
    return std::sqrt(dx * dx + dy * dy);
}

/// Hand-drawn stroke skeletons for ten digit-like glyph classes, in a 28x28
/// box. Each class is a list of polylines.
inline const std::vector<std::vector<std::vector<Point>>>& glyphs() {
    static const std::vector<std::vector<std::vector<Point>>> g = {
        // 0: wide ring
        {{{14.0, 6.5}, {10.8, 7.8}, {9.2, 10.5}, {8.8, 14.0}, {9.2, 17.5}, {10.8, 20.2},
          {14.0, 21.5}, {17.2, 20.2}, {18.8, 17.5}, {19.2, 14.0}, {18.8, 10.5}, {17.2, 7.8},
          {14.0, 6.5}}},
        // 1: near-vertical bar
        {{{14.0, 6.0}, {14.0, 22.0}}},
        // 2: open arc into a base bar
        {{{9.5, 9.5}, {10.8, 7.2}, {13.8, 6.2}, {16.8, 7.0}, {18.2, 9.3}, {17.6, 12.0},
          {15.0, 14.8}, {12.0, 17.2}, {9.8, 19.6}, {9.5, 21.3}},
         {{9.5, 21.3}, {18.6, 21.3}}},
        // 3: right-facing double arc
        {{{10.0, 7.4}, {13.2, 6.3}, {16.4, 7.0}, {17.6, 9.2}, {16.6, 11.5}, {14.0, 12.9}},
         {{14.0, 12.9}, {16.8, 14.0}, {18.0, 16.6}, {16.8, 19.6}, {13.6, 21.3}, {10.2, 20.4}}},
        // 4: diagonal meeting a right vertical
        {{{16.2, 6.0}, {9.2, 16.2}, {19.2, 16.2}}, {{16.2, 6.0}, {16.2, 22.0}}},
        // 5: cap bar into an S-bowl
        {{{18.0, 6.6}, {10.2, 6.6}, {10.2, 12.6}},
         {{10.2, 12.6}, {14.6, 12.2}, {17.6, 14.4}, {17.2, 18.6}, {13.4, 21.2}, {9.8, 19.8}}},
        // 6: spine with a lower loop
        {{{16.8, 6.4}, {12.8, 8.0}, {10.4, 11.2}, {9.6, 15.0}, {10.2, 18.4}, {12.6, 20.9},
          {15.6, 20.7}, {17.6, 18.3}, {17.0, 15.4}, {14.4, 14.0}, {11.6, 14.9}, {10.1, 16.8}}},
        // 7: cap bar and diagonal
        {{{9.6, 7.0}, {18.4, 7.0}}, {{18.4, 7.0}, {12.2, 22.0}}},
        // 8: tall narrow ring, offset from 0 by aspect
        {{{14.0, 5.8}, {11.6, 7.4}, {10.8, 10.8}, {11.0, 14.0}, {10.8, 17.2}, {11.6, 20.6},
          {14.0, 22.2}, {16.4, 20.6}, {17.2, 17.2}, {17.0, 14.0}, {17.2, 10.8}, {16.4, 7.4},
          {14.0, 5.8}}},
        // 9: loop with a tail
        {{{17.6, 9.6}, {15.6, 7.0}, {12.6, 6.8}, {10.3, 8.8}, {10.1, 11.6}, {12.1, 13.6},
          {14.9, 13.9}, {17.1, 12.4}, {17.6, 9.6}},
         {{17.6, 9.6}, {17.3, 16.0}, {15.5, 21.5}}}};
    return g;
}

} // namespace detail

struct DigitOptions {
    double core_lo = 0.4;        // flat stroke core half-width of the wide glyphs
    double core_hi = 0.8;
    double skirt = 1.5;          // Gaussian falloff width outside the core
    double footprint = 0.8;      // glyph box scale relative to the drawn skeleton
    double noise_lo_exp = -5.7;  // log10 range of the per-image noise floor
    double noise_hi_exp = -2.6;
};

/// One 28x28 digit-like image. The bulk of the classes are wide smooth
/// glyphs whose quantized rank exceeds the calibration cutoff; class 1 stays
/// thin (rank far below the cutoff, so its tail is rounding dust) and a
/// small slice of it is exact constant bars, the way trivial MNIST ones
/// quantize to exactly low rank.
inline Image make_digit(int label, std::uint64_t seed, const DigitOptions& opt = {}) {
    Rng rng(seed);
    Image img;
    img.rows = img.cols = 28;
    img.channels = 1;
    img.pixels.assign(784, 0.0);

    // per-image pose; non-1 glyphs are widened to fill the frame like real
    // handwriting (their column support is what puts rank above the cutoff)
    const bool thin = label == 1;
    const double widen_x = (thin ? 0.72 : 1.0) * opt.footprint;
    const double widen_y = 0.97 * opt.footprint;
    const double scale = rng.uniform(0.9, 1.02);
    const double angle = rng.uniform(-0.1, 0.1);
    const double dx = rng.uniform(-1.3, 1.3);
    const double dy = rng.uniform(-1.0, 1.0);
    const double core = thin ? rng.uniform(0.5, 0.9) : rng.uniform(opt.core_lo, opt.core_hi);
    const double skirt = thin ? 0.8 : opt.skirt;
    const double intensity = rng.uniform(0.8, 1.0);
    const double cosr = std::cos(angle), sinr = std::sin(angle);

    std::vector<std::vector<Point>> strokes = detail::glyphs()[label];
    for (auto& stroke : strokes)
        for (Point& p : stroke) {
            const double ox = (p.x - 14.0) * widen_x * scale;
            const double oy = (p.y - 14.0) * widen_y * scale;
            p.x = 14.0 + cosr * ox - sinr * oy + dx;
            p.y = 14.0 + sinr * ox + cosr * oy + dy;
        }

    for (int i = 0; i < 28; ++i) {
        for (int j = 0; j < 28; ++j) {
            double d = 1e9;
            for (const auto& stroke : strokes)
                for (std::size_t s = 0; s + 1 < stroke.size(); ++s)
                    d = std::min(d,
                                 detail::dist_to_segment(j + 0.5, i + 0.5, stroke[s], stroke[s + 1]));
            // flat ink core with a Gaussian skirt: compact spectra that
            // collapse right after the leading structure, like real digits
            const double over = std::max(0.0, d - core);
            const double cover = std::exp(-over * over / (2.0 * skirt * skirt));
            if (cover < 1e-4) continue;
            img.at(i, j, 0) = std::clamp(intensity * cover, 0.0, 1.0);
        }
    }

    // continuous sensor-noise floor, log-uniform scale across images: keeps
    // the tail-energy distribution continuous from ~1e-7 up to a few 1e-3
    const double amp = std::pow(10.0, rng.uniform(opt.noise_lo_exp, opt.noise_hi_exp));
    for (double& v : img.pixels) v = std::clamp(v + amp * rng.normal(), 0.0, 1.0);
    return img;
}

inline void make_digit_corpus(int count, std::uint64_t seed, std::vector<Image>& images,
                              std::vector<int>& labels, const DigitOptions& opt = {}) {
    images.clear();
    labels.clear();
    images.reserve(count);
    labels.reserve(count);
    for (int t = 0; t < count; ++t) {
        const int label = t % 10;
        images.push_back(make_digit(label, specdet::mix_seed(seed, t), opt));
        labels.push_back(label);
    }
}

struct TextureOptions {
    double contrast = 1.2;       // slope of the mid-range contrast curve
    double wave_amp = 0.13;      // amplitude of each cosine component
    double noise_lo_exp = -4.3;  // log10 range of the per-image noise floor
    double noise_hi_exp = -2.35;
};

/// One 32x32x3 texture image. Classes differ by color anchors and by the
/// orientation/frequency band of their cosine waves.
inline Image make_texture(int label, std::uint64_t seed, const TextureOptions& opt = {}) {
    Rng rng(seed);
    Image img;
    img.rows = img.cols = 32;
    img.channels = 3;
    img.pixels.assign(32 * 32 * 3, 0.0);

    // class color anchors spread around the RGB cube
    const double base[10][3] = {{0.70, 0.30, 0.25}, {0.25, 0.65, 0.35}, {0.30, 0.35, 0.75},
                                {0.70, 0.65, 0.25}, {0.65, 0.30, 0.70}, {0.25, 0.65, 0.70},
                                {0.55, 0.55, 0.55}, {0.75, 0.50, 0.30}, {0.35, 0.50, 0.60},
                                {0.50, 0.30, 0.45}};
    const double angle0 = 0.314159 * label;
    const double freq0 = 0.7 + 0.2 * (label % 5);

    struct Wave {
        double fx, fy, phase, amp;
    };
    std::vector<Wave> waves;
    for (int w = 0; w < 2; ++w) {
        const double angle = angle0 + rng.uniform(-0.25, 0.25) + 1.5707963 * w;
        const double freq = (freq0 + 0.5 * w) * rng.uniform(0.85, 1.15);
        waves.push_back({freq * std::cos(angle) * 2.0 * 3.14159265358979 / 32.0,
                         freq * std::sin(angle) * 2.0 * 3.14159265358979 / 32.0,
                         rng.uniform(0.0, 6.2831853), opt.wave_amp * rng.uniform(0.7, 1.0)});
    }
    // gentle diagonal shading, different strength per image
    const double gx = rng.uniform(-0.1, 0.1), gy = rng.uniform(-0.1, 0.1);
    const double eta = std::pow(10.0, rng.uniform(opt.noise_lo_exp, opt.noise_hi_exp));
    const double channel_mix[3] = {rng.uniform(0.8, 1.2), rng.uniform(0.8, 1.2),
                                   rng.uniform(0.8, 1.2)};

    for (int i = 0; i < 32; ++i) {
        for (int j = 0; j < 32; ++j) {
            double field = 0.0;
            for (const Wave& w : waves) field += w.amp * std::cos(w.fx * j + w.fy * i + w.phase);
            field += gx * (j - 15.5) / 16.0 + gy * (i - 15.5) / 16.0;
            for (int c = 0; c < 3; ++c) {
                // anchors squeezed toward mid-range so the wave sum rarely
                // clips; clipping harmonics would fatten the spectral tail
                double v = 0.5 + 0.62 * (base[label][c] - 0.5) + channel_mix[c] * field;
                v = 0.5 + opt.contrast * (v - 0.5);  // saturating contrast
                v += eta * rng.normal();
                img.at(i, j, c) = std::clamp(v, 0.0, 1.0);
            }
        }
    }
    return img;
}

inline void make_texture_corpus(int count, std::uint64_t seed, std::vector<Image>& images,
                                std::vector<int>& labels, const TextureOptions& opt = {}) {
    images.clear();
    labels.clear();
    images.reserve(count);
    labels.reserve(count);
    for (int t = 0; t < count; ++t) {
        const int label = t % 10;
        images.push_back(make_texture(label, specdet::mix_seed(seed, t), opt));
        labels.push_back(label);
    }
}

} // namespace synth
