#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "specdet/classifier.hpp"
#include "specdet/errors.hpp"
#include "specdet/image.hpp"
#include "specdet/rng.hpp"

namespace specdet {

enum class AttackKind { Fgsm, Pgd, Momentum, RandomSign };

inline const char* attack_kind_name(AttackKind k) {
    switch (k) {
        case AttackKind::Fgsm: return "fgsm";
        case AttackKind::Pgd: return "pgd";
        case AttackKind::Momentum: return "momentum";
        case AttackKind::RandomSign: return "random_sign";
    }
    return "?";
}

inline AttackKind attack_kind_from_name(const std::string& name) {
    if (name == "fgsm") return AttackKind::Fgsm;
    if (name == "pgd") return AttackKind::Pgd;
    if (name == "momentum") return AttackKind::Momentum;
    if (name == "random_sign") return AttackKind::RandomSign;
    throw DataError("unknown attack kind '" + name + "'");
}

struct AttackConfig {
    AttackKind kind = AttackKind::Fgsm;
    double epsilon = 0.1;     // max-norm budget
    int steps = 10;
    double step_size = 0.0;   // pgd only; 0 means epsilon/4
    double momentum_decay = 1.0;
    std::uint64_t seed = 0;
    bool random_start = true;  // pgd only
};

namespace detail {

inline double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

/// Project onto the epsilon ball around the original, then into [0,1].
inline void project(std::vector<double>& x, const std::vector<double>& origin, double eps) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = std::clamp(x[i], origin[i] - eps, origin[i] + eps);
        x[i] = std::clamp(x[i], 0.0, 1.0);
    }
}

inline Image with_pixels(const Image& img, std::vector<double> pixels) {
    Image out = img;
    out.pixels = std::move(pixels);
    return out;
}

inline void require_model_match(const TinyClassifier& model, const Image& img) {
    if (model.rows != img.rows || model.cols != img.cols || model.channels != img.channels)
        throw std::invalid_argument("attack: image dimensions do not match model");
}

} // namespace detail

/// Iterative fast-gradient-sign: each of `steps` moves eps/steps along the
/// loss-gradient sign, staying inside the budget and pixel range.
inline Image fgsm(const TinyClassifier& model, const Image& img, int label, double epsilon,
                  int steps = 10) {
    detail::require_model_match(model, img);
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw std::invalid_argument("fgsm: epsilon in (0,1]");
    if (steps < 1) throw std::invalid_argument("fgsm: steps >= 1");
    std::vector<double> x = img.pixels;
    const double step = epsilon / steps;
    for (int s = 0; s < steps; ++s) {
        const std::vector<double> g = input_gradient(model, x, label);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += step * detail::sign0(g[i]);
        detail::project(x, img.pixels, epsilon);
    }
    return detail::with_pixels(img, std::move(x));
}

/// Projected gradient descent (Madry): seeded random start in the budget
/// ball, then sign-gradient ascent with projection after every step.
inline Image pgd(const TinyClassifier& model, const Image& img, int label, double epsilon,
                 int steps, double step_size, std::uint64_t seed, bool random_start = true) {
    detail::require_model_match(model, img);
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw std::invalid_argument("pgd: epsilon in (0,1]");
    if (steps < 1) throw std::invalid_argument("pgd: steps >= 1");
    if (!(step_size > 0.0 && step_size <= epsilon))
        throw std::invalid_argument("pgd: step_size in (0, epsilon]");
    std::vector<double> x = img.pixels;
    if (random_start) {
        Rng rng(mix_seed(seed, 0x706764ull));
        for (double& v : x) v += rng.uniform(-epsilon, epsilon);
        detail::project(x, img.pixels, epsilon);
    }
    for (int s = 0; s < steps; ++s) {
        const std::vector<double> g = input_gradient(model, x, label);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += step_size * detail::sign0(g[i]);
        detail::project(x, img.pixels, epsilon);
    }
    return detail::with_pixels(img, std::move(x));
}

/// Momentum iterative attack: accumulate L1-normalized gradients with decay
/// mu, step along the accumulated sign.
inline Image momentum_attack(const TinyClassifier& model, const Image& img, int label,
                             double epsilon, int steps = 10, double mu = 1.0) {
    detail::require_model_match(model, img);
    if (!(epsilon > 0.0 && epsilon <= 1.0))
        throw std::invalid_argument("momentum_attack: epsilon in (0,1]");
    if (steps < 1) throw std::invalid_argument("momentum_attack: steps >= 1");
    if (mu < 0.0) throw std::invalid_argument("momentum_attack: mu >= 0");
    std::vector<double> x = img.pixels;
    std::vector<double> g(x.size(), 0.0);
    const double step = epsilon / steps;
    for (int s = 0; s < steps; ++s) {
        const std::vector<double> grad = input_gradient(model, x, label);
        double l1 = 0.0;
        for (double v : grad) l1 += std::abs(v);
        if (l1 > 0.0) {
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = mu * g[i] + grad[i] / l1;
        } else {
            for (double& v : g) v *= mu;  // zero gradient: decay only
        }
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += step * detail::sign0(g[i]);
        detail::project(x, img.pixels, epsilon);
    }
    return detail::with_pixels(img, std::move(x));
}

/// Model-free control: every pixel moves by +/-epsilon, seeded.
inline Image random_sign_perturbation(const Image& img, double epsilon, std::uint64_t seed) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0))
        throw std::invalid_argument("random_sign_perturbation: epsilon in [0,1]");
    Rng rng(mix_seed(seed, 0x72736eull));
    std::vector<double> x = img.pixels;
    for (double& v : x) v = std::clamp(v + rng.sign() * epsilon, 0.0, 1.0);
    return detail::with_pixels(img, std::move(x));
}

/// Dispatch one configured attack; per-image randomness derives from
/// (config.seed, image_index) so batches are order independent.
inline Image run_attack(const TinyClassifier& model, const Image& img, int label,
                        const AttackConfig& cfg, std::uint64_t image_index) {
    const std::uint64_t item_seed = mix_seed(cfg.seed, image_index);
    switch (cfg.kind) {
        case AttackKind::Fgsm:
            return fgsm(model, img, label, cfg.epsilon, cfg.steps);
        case AttackKind::Pgd: {
            const double step = cfg.step_size > 0.0 ? cfg.step_size : cfg.epsilon / 4.0;
            return pgd(model, img, label, cfg.epsilon, cfg.steps, step, item_seed,
                       cfg.random_start);
        }
        case AttackKind::Momentum:
            return momentum_attack(model, img, label, cfg.epsilon, cfg.steps, cfg.momentum_decay);
        case AttackKind::RandomSign:
            return random_sign_perturbation(img, cfg.epsilon, item_seed);
    }
    throw std::invalid_argument("run_attack: bad kind");
}

} // namespace specdet
