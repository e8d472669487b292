#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "specdet/errors.hpp"
#include "specdet/image.hpp"
#include "specdet/rng.hpp"

namespace specdet {

/// Small differentiable softmax classifier used to generate attacks: either
/// plain softmax regression or one ReLU hidden layer. Deliberately tiny; the
/// detector never sees model internals, only attacked pixels.
struct TinyClassifier {
    enum class Arch : std::uint32_t { SoftmaxLinear = 0, OneHidden = 1 };

    Arch arch = Arch::SoftmaxLinear;
    int rows = 0;
    int cols = 0;
    int channels = 0;
    int classes = 0;
    int hidden = 0;  // 0 for the linear architecture

    // linear: w1 is (classes x dim), b1 has classes entries, w2/b2 empty
    // one-hidden: w1 (hidden x dim), b1 hidden, w2 (classes x hidden), b2 classes
    std::vector<double> w1, b1, w2, b2;

    struct TrainMeta {
        std::uint64_t seed = 0;
        int epochs = 0;
        double learning_rate = 0.0;
        double final_train_accuracy = 0.0;
        double final_val_accuracy = 0.0;
    } meta;

    int dim() const { return rows * cols * channels; }

    bool same_weights(const TinyClassifier& o) const {
        return arch == o.arch && w1 == o.w1 && b1 == o.b1 && w2 == o.w2 && b2 == o.b2;
    }
};

namespace detail {

inline void softmax_inplace(std::vector<double>& logits) {
    double peak = logits[0];
    for (double v : logits) peak = std::max(peak, v);
    double sum = 0.0;
    for (double& v : logits) {
        v = std::exp(v - peak);
        sum += v;
    }
    for (double& v : logits) v /= sum;
}

/// log(sum exp(z)) with max-subtraction; keeps the loss finite at confident
/// predictions.
inline double log_sum_exp(const std::vector<double>& z) {
    double peak = z[0];
    for (double v : z) peak = std::max(peak, v);
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - peak);
    return peak + std::log(sum);
}

} // namespace detail

inline std::vector<double> logits(const TinyClassifier& model, const std::vector<double>& x,
                                  std::vector<double>* hidden_pre = nullptr) {
    const int d = model.dim();
    if (static_cast<int>(x.size()) != d)
        throw std::invalid_argument("logits: input size does not match model");
    if (model.arch == TinyClassifier::Arch::SoftmaxLinear) {
        std::vector<double> z(model.classes);
        for (int c = 0; c < model.classes; ++c) {
            const double* row = model.w1.data() + static_cast<std::size_t>(c) * d;
            double sum = model.b1[c];
            for (int j = 0; j < d; ++j) sum += row[j] * x[j];
            z[c] = sum;
        }
        return z;
    }
    std::vector<double> h(model.hidden);
    for (int i = 0; i < model.hidden; ++i) {
        const double* row = model.w1.data() + static_cast<std::size_t>(i) * d;
        double sum = model.b1[i];
        for (int j = 0; j < d; ++j) sum += row[j] * x[j];
        h[i] = sum;
    }
    if (hidden_pre) *hidden_pre = h;
    for (double& v : h) v = std::max(0.0, v);
    std::vector<double> z(model.classes);
    for (int c = 0; c < model.classes; ++c) {
        const double* row = model.w2.data() + static_cast<std::size_t>(c) * model.hidden;
        double sum = model.b2[c];
        for (int i = 0; i < model.hidden; ++i) sum += row[i] * h[i];
        z[c] = sum;
    }
    return z;
}

/// Class probabilities; sums to 1 within rounding.
inline std::vector<double> forward(const TinyClassifier& model, const std::vector<double>& x) {
    std::vector<double> z = logits(model, x);
    detail::softmax_inplace(z);
    return z;
}

inline int predict_class(const TinyClassifier& model, const std::vector<double>& x) {
    const std::vector<double> z = logits(model, x);
    return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

/// Cross-entropy loss of one example, computed via log-sum-exp.
inline double cross_entropy(const TinyClassifier& model, const std::vector<double>& x, int label) {
    if (label < 0 || label >= model.classes) throw std::invalid_argument("cross_entropy: bad label");
    const std::vector<double> z = logits(model, x);
    return detail::log_sum_exp(z) - z[label];
}

/// Gradient of the single-example cross-entropy loss with respect to the
/// input pixels.
inline std::vector<double> input_gradient(const TinyClassifier& model,
                                          const std::vector<double>& x, int label) {
    if (label < 0 || label >= model.classes)
        throw std::invalid_argument("input_gradient: bad label");
    const int d = model.dim();
    if (static_cast<int>(x.size()) != d)
        throw std::invalid_argument("input_gradient: input size does not match model");

    if (model.arch == TinyClassifier::Arch::SoftmaxLinear) {
        std::vector<double> p = forward(model, x);
        p[label] -= 1.0;  // dL/dz
        std::vector<double> g(d, 0.0);
        for (int c = 0; c < model.classes; ++c) {
            const double pc = p[c];
            if (pc == 0.0) continue;
            const double* row = model.w1.data() + static_cast<std::size_t>(c) * d;
            for (int j = 0; j < d; ++j) g[j] += pc * row[j];
        }
        return g;
    }

    std::vector<double> pre;
    std::vector<double> z = logits(model, x, &pre);
    detail::softmax_inplace(z);
    z[label] -= 1.0;  // dL/dz
    std::vector<double> dh(model.hidden, 0.0);
    for (int c = 0; c < model.classes; ++c) {
        const double pc = z[c];
        if (pc == 0.0) continue;
        const double* row = model.w2.data() + static_cast<std::size_t>(c) * model.hidden;
        for (int i = 0; i < model.hidden; ++i) dh[i] += pc * row[i];
    }
    for (int i = 0; i < model.hidden; ++i)
        if (pre[i] <= 0.0) dh[i] = 0.0;  // ReLU gate
    std::vector<double> g(d, 0.0);
    for (int i = 0; i < model.hidden; ++i) {
        const double di = dh[i];
        if (di == 0.0) continue;
        const double* row = model.w1.data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < d; ++j) g[j] += di * row[j];
    }
    return g;
}

inline std::vector<double> input_gradient(const TinyClassifier& model, const Image& img,
                                          int label) {
    return input_gradient(model, img.pixels, label);
}

inline double accuracy(const TinyClassifier& model, const std::vector<Image>& images,
                       const std::vector<int>& labels) {
    if (images.empty() || images.size() != labels.size())
        throw std::invalid_argument("accuracy: bad evaluation set");
    int hits = 0;
    for (std::size_t i = 0; i < images.size(); ++i)
        if (predict_class(model, images[i].pixels) == labels[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(images.size());
}

struct TrainConfig {
    TinyClassifier::Arch arch = TinyClassifier::Arch::SoftmaxLinear;
    int hidden = 32;
    int classes = 10;
    int epochs = 30;
    double learning_rate = 0.1;
    double lr_decay = 0.95;   // per epoch
    std::uint64_t seed = 1;
    double val_fraction = 0.1;  // trailing slice held out for validation

    std::string echo() const {
        return "arch=" + std::string(arch == TinyClassifier::Arch::SoftmaxLinear ? "linear"
                                                                                 : "one-hidden") +
               " hidden=" + std::to_string(hidden) + " classes=" + std::to_string(classes) +
               " epochs=" + std::to_string(epochs) + " lr=" + std::to_string(learning_rate) +
               " seed=" + std::to_string(seed);
    }
};

/// Seeded SGD training. The trailing val_fraction of the input is held out;
/// everything about the run (init, shuffles) derives from config.seed.
inline TinyClassifier train_classifier(const std::vector<Image>& images,
                                       const std::vector<int>& labels, const TrainConfig& cfg) {
    if (images.empty() || images.size() != labels.size())
        throw DataError("train_classifier: images and labels must align");
    for (int label : labels)
        if (label < 0 || label >= cfg.classes) throw DataError("train_classifier: label out of range");

    const Image& first = images.front();
    TinyClassifier model;
    model.arch = cfg.arch;
    model.rows = first.rows;
    model.cols = first.cols;
    model.channels = first.channels;
    model.classes = cfg.classes;
    model.hidden = cfg.arch == TinyClassifier::Arch::OneHidden ? cfg.hidden : 0;
    model.meta.seed = cfg.seed;
    model.meta.epochs = cfg.epochs;
    model.meta.learning_rate = cfg.learning_rate;

    const int d = model.dim();
    Rng rng(mix_seed(cfg.seed, 0x7261696Eull));
    if (cfg.arch == TinyClassifier::Arch::SoftmaxLinear) {
        model.w1.resize(static_cast<std::size_t>(model.classes) * d);
        model.b1.assign(model.classes, 0.0);
        for (double& w : model.w1) w = 0.01 * rng.normal();
    } else {
        if (cfg.hidden < 1) throw DataError("train_classifier: hidden width must be positive");
        model.w1.resize(static_cast<std::size_t>(model.hidden) * d);
        model.b1.assign(model.hidden, 0.0);
        model.w2.resize(static_cast<std::size_t>(model.classes) * model.hidden);
        model.b2.assign(model.classes, 0.0);
        const double scale1 = std::sqrt(2.0 / d);
        for (double& w : model.w1) w = scale1 * rng.normal();
        const double scale2 = std::sqrt(2.0 / model.hidden);
        for (double& w : model.w2) w = scale2 * rng.normal();
    }

    const int n = static_cast<int>(images.size());
    int n_val = static_cast<int>(std::floor(cfg.val_fraction * n));
    if (n_val >= n) n_val = n - 1;
    const int n_train = n - n_val;

    std::vector<int> order(n_train);
    for (int i = 0; i < n_train; ++i) order[i] = i;

    double lr = cfg.learning_rate;
    std::vector<double> dh, pre;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates with the portable generator
        for (int i = n_train - 1; i > 0; --i)
            std::swap(order[i], order[rng.uniform_int(i + 1)]);

        double loss_sum = 0.0;
        for (int idx : order) {
            const std::vector<double>& x = images[idx].pixels;
            const int y = labels[idx];
            if (model.arch == TinyClassifier::Arch::SoftmaxLinear) {
                std::vector<double> z = logits(model, x);
                loss_sum += detail::log_sum_exp(z) - z[y];
                detail::softmax_inplace(z);
                z[y] -= 1.0;
                for (int c = 0; c < model.classes; ++c) {
                    const double step = lr * z[c];
                    if (step == 0.0) continue;
                    double* row = model.w1.data() + static_cast<std::size_t>(c) * d;
                    for (int j = 0; j < d; ++j) row[j] -= step * x[j];
                    model.b1[c] -= step;
                }
            } else {
                std::vector<double> z = logits(model, x, &pre);
                loss_sum += detail::log_sum_exp(z) - z[y];
                detail::softmax_inplace(z);
                z[y] -= 1.0;
                dh.assign(model.hidden, 0.0);
                for (int c = 0; c < model.classes; ++c) {
                    const double pc = z[c];
                    double* row = model.w2.data() + static_cast<std::size_t>(c) * model.hidden;
                    for (int i = 0; i < model.hidden; ++i) {
                        const double h = std::max(0.0, pre[i]);
                        dh[i] += pc * row[i];
                        row[i] -= lr * pc * h;
                    }
                    model.b2[c] -= lr * pc;
                }
                for (int i = 0; i < model.hidden; ++i) {
                    if (pre[i] <= 0.0) continue;
                    const double step = lr * dh[i];
                    if (step == 0.0) continue;
                    double* row = model.w1.data() + static_cast<std::size_t>(i) * d;
                    for (int j = 0; j < d; ++j) row[j] -= step * x[j];
                    model.b1[i] -= step;
                }
            }
        }
        if (!std::isfinite(loss_sum))
            throw NumericalError("train_classifier: loss diverged (" + cfg.echo() + ")");
        lr *= cfg.lr_decay;
    }

    // final accuracies over the split used for training and validation
    {
        int hits = 0;
        for (int i = 0; i < n_train; ++i)
            if (predict_class(model, images[i].pixels) == labels[i]) ++hits;
        model.meta.final_train_accuracy = static_cast<double>(hits) / n_train;
        if (n_val > 0) {
            hits = 0;
            for (int i = n_train; i < n; ++i)
                if (predict_class(model, images[i].pixels) == labels[i]) ++hits;
            model.meta.final_val_accuracy = static_cast<double>(hits) / n_val;
        } else {
            model.meta.final_val_accuracy = model.meta.final_train_accuracy;
        }
    }
    return model;
}

// ---- checkpoint: "TCLF" header + little-endian payload ----

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_f64(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

struct ByteReader {
    const unsigned char* p;
    std::size_t remaining;

    std::uint32_t u32() {
        if (remaining < 4) throw DataError("model checkpoint: truncated file");
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
        p += 4;
        remaining -= 4;
        return v;
    }
    std::uint64_t u64() {
        if (remaining < 8) throw DataError("model checkpoint: truncated file");
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
        p += 8;
        remaining -= 8;
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
};

} // namespace detail

inline void save_model(const TinyClassifier& model, const std::string& path) {
    std::string out;
    out += "TCLF";
    detail::put_u32(out, 1);  // version
    detail::put_u32(out, static_cast<std::uint32_t>(model.arch));
    detail::put_u32(out, static_cast<std::uint32_t>(model.rows));
    detail::put_u32(out, static_cast<std::uint32_t>(model.cols));
    detail::put_u32(out, static_cast<std::uint32_t>(model.channels));
    detail::put_u32(out, static_cast<std::uint32_t>(model.classes));
    detail::put_u32(out, static_cast<std::uint32_t>(model.hidden));
    detail::put_u64(out, model.meta.seed);
    detail::put_u32(out, static_cast<std::uint32_t>(model.meta.epochs));
    detail::put_f64(out, model.meta.learning_rate);
    detail::put_f64(out, model.meta.final_train_accuracy);
    detail::put_f64(out, model.meta.final_val_accuracy);
    for (const auto* block : {&model.w1, &model.b1, &model.w2, &model.b2})
        for (double v : *block) detail::put_f64(out, v);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("save_model: cannot open " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("save_model: write failed for " + path);
}

inline TinyClassifier load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("load_model: cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (bytes.size() < 4 || bytes.compare(0, 4, "TCLF") != 0)
        throw DataError("load_model: bad magic (not a TCLF checkpoint)");

    detail::ByteReader r{reinterpret_cast<const unsigned char*>(bytes.data()) + 4,
                         bytes.size() - 4};
    const std::uint32_t version = r.u32();
    if (version != 1) throw DataError("load_model: unsupported version " + std::to_string(version));

    TinyClassifier m;
    const std::uint32_t arch = r.u32();
    if (arch > 1) throw DataError("load_model: unknown architecture code");
    m.arch = static_cast<TinyClassifier::Arch>(arch);
    m.rows = static_cast<int>(r.u32());
    m.cols = static_cast<int>(r.u32());
    m.channels = static_cast<int>(r.u32());
    m.classes = static_cast<int>(r.u32());
    m.hidden = static_cast<int>(r.u32());
    if (m.rows < 1 || m.cols < 1 || m.channels < 1 || m.classes < 1)
        throw DataError("load_model: bad dimensions");
    m.meta.seed = r.u64();
    m.meta.epochs = static_cast<int>(r.u32());
    m.meta.learning_rate = r.f64();
    m.meta.final_train_accuracy = r.f64();
    m.meta.final_val_accuracy = r.f64();

    const std::size_t d = static_cast<std::size_t>(m.dim());
    std::size_t n_w1, n_b1, n_w2, n_b2;
    if (m.arch == TinyClassifier::Arch::SoftmaxLinear) {
        n_w1 = static_cast<std::size_t>(m.classes) * d;
        n_b1 = m.classes;
        n_w2 = n_b2 = 0;
    } else {
        if (m.hidden < 1) throw DataError("load_model: hidden architecture with no hidden units");
        n_w1 = static_cast<std::size_t>(m.hidden) * d;
        n_b1 = m.hidden;
        n_w2 = static_cast<std::size_t>(m.classes) * m.hidden;
        n_b2 = m.classes;
    }
    if (r.remaining != (n_w1 + n_b1 + n_w2 + n_b2) * 8)
        throw DataError("load_model: payload size does not match header");
    auto read_block = [&](std::vector<double>& dst, std::size_t count) {
        dst.resize(count);
        for (std::size_t i = 0; i < count; ++i) dst[i] = r.f64();
    };
    read_block(m.w1, n_w1);
    read_block(m.b1, n_b1);
    read_block(m.w2, n_w2);
    read_block(m.b2, n_b2);
    return m;
}

} // namespace specdet
