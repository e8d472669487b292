#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "specdet/attack.hpp"
#include "specdet/classifier.hpp"
#include "specdet/svd.hpp"
#include "support/oracles.hpp"
#include "support/synth_corpus.hpp"

using namespace specdet;

namespace {

std::string scratch_path(const std::string& name) {
    return std::string(SPECDET_TEST_SCRATCH) + "/" + name;
}

/// Four-class 4x4 blob images: one bright quadrant per class plus noise.
void make_blobs(int n, std::uint64_t seed, std::vector<Image>& images, std::vector<int>& labels) {
    Rng rng(seed);
    images.clear();
    labels.clear();
    const int centers[4][2] = {{1, 1}, {1, 3}, {3, 1}, {3, 3}};
    for (int t = 0; t < n; ++t) {
        const int c = t % 4;
        Image img{4, 4, 1, std::vector<double>(16, 0.0)};
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                const double di = i - centers[c][0] + 0.5;
                const double dj = j - centers[c][1] + 0.5;
                const double bump = 0.85 * std::exp(-(di * di + dj * dj) / 1.2);
                img.at(i, j, 0) = std::clamp(bump + 0.1 * rng.uniform(), 0.0, 1.0);
            }
        images.push_back(std::move(img));
        labels.push_back(c);
    }
}

TinyClassifier blob_model(std::uint64_t seed = 5) {
    std::vector<Image> images;
    std::vector<int> labels;
    make_blobs(400, 77, images, labels);
    TrainConfig cfg;
    cfg.classes = 4;
    cfg.epochs = 12;
    cfg.learning_rate = 0.3;
    cfg.seed = seed;
    return train_classifier(images, labels, cfg);
}

/// 1-pixel binary model with logits (a*x, 0); gradient of the label-1 loss
/// is a * p0, strictly positive for a > 0.
TinyClassifier one_pixel_model(double a) {
    TinyClassifier m;
    m.arch = TinyClassifier::Arch::SoftmaxLinear;
    m.rows = m.cols = m.channels = 1;
    m.classes = 2;
    m.w1 = {a, 0.0};
    m.b1 = {0.0, 0.0};
    return m;
}

double linf(const Image& a, const Image& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i)
        worst = std::max(worst, std::abs(a.pixels[i] - b.pixels[i]));
    return worst;
}

} // namespace

TEST_CASE("forward produces a probability simplex") {
    TinyClassifier linear = blob_model();
    std::vector<Image> images;
    std::vector<int> labels;
    make_blobs(20, 900, images, labels);
    for (const Image& img : images) {
        const auto p = forward(linear, img.pixels);
        double sum = 0.0;
        for (double v : p) {
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-6);
    }
}

TEST_CASE("training is deterministic and learns the blobs") {
    TinyClassifier a = blob_model(5);
    TinyClassifier b = blob_model(5);
    CHECK(a.same_weights(b));
    TinyClassifier c = blob_model(6);
    CHECK_FALSE(c.same_weights(a));

    CHECK(a.meta.final_train_accuracy >= 0.95);
    CHECK(a.meta.final_val_accuracy >= 0.9);
}

TEST_CASE("zero-epoch model predicts near chance") {
    std::vector<Image> images;
    std::vector<int> labels;
    make_blobs(400, 78, images, labels);
    TrainConfig cfg;
    cfg.classes = 4;
    cfg.epochs = 0;
    cfg.seed = 3;
    TinyClassifier m = train_classifier(images, labels, cfg);
    const double acc = accuracy(m, images, labels);
    CHECK(acc <= 0.6);  // untrained weights, roughly 1/C
}

TEST_CASE("divergent training is reported with the config echo") {
    std::vector<Image> images;
    std::vector<int> labels;
    make_blobs(100, 79, images, labels);
    TrainConfig cfg;
    cfg.classes = 4;
    cfg.epochs = 3;
    cfg.learning_rate = 1e308;  // overflows the logit accumulation into NaN losses
    cfg.seed = 3;
    CHECK_THROWS_AS(train_classifier(images, labels, cfg), NumericalError);
    try {
        train_classifier(images, labels, cfg);
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("lr=") != std::string::npos);
    }
}

TEST_CASE("analytic input gradients match central finite differences") {
    std::vector<Image> images;
    std::vector<int> labels;
    make_blobs(8, 81, images, labels);

    auto check_model = [&](const TinyClassifier& model) {
        Rng rng(82);
        int checked = 0;
        for (const Image& img : images) {
            const int label = labels[checked % labels.size()];
            const auto grad = input_gradient(model, img, label);
            auto loss = [&](const std::vector<double>& x) {
                return cross_entropy(model, x, label);
            };
            for (int reps = 0; reps < 15; ++reps) {
                const std::size_t coord = rng.uniform_int(16);
                const double numeric = oracle::central_difference(loss, img.pixels, coord, 1e-4);
                CHECK(std::abs(grad[coord] - numeric) <= 1e-5);
                ++checked;
            }
        }
        CHECK(checked >= 100);
    };

    SUBCASE("softmax-linear") { check_model(blob_model()); }
    SUBCASE("one-hidden-layer") {
        std::vector<Image> train;
        std::vector<int> train_labels;
        make_blobs(400, 83, train, train_labels);
        TrainConfig cfg;
        cfg.arch = TinyClassifier::Arch::OneHidden;
        cfg.hidden = 12;
        cfg.classes = 4;
        cfg.epochs = 10;
        cfg.learning_rate = 0.1;
        cfg.seed = 9;
        check_model(train_classifier(train, train_labels, cfg));
    }
}

TEST_CASE("gradient of a saturated correct prediction is near zero") {
    TinyClassifier m = one_pixel_model(80.0);
    // x = 1: logit gap 80, p0 ~ 1; loss for label 0 is ~0 and so is its slope
    const auto g = input_gradient(m, std::vector<double>{1.0}, 0);
    CHECK(std::abs(g[0]) <= 1e-20);
}

TEST_CASE("linear model: equal logits imply equal input gradients") {
    // null direction: last input coordinate has zero weight in every class
    TinyClassifier m;
    m.arch = TinyClassifier::Arch::SoftmaxLinear;
    m.rows = 1;
    m.cols = 3;
    m.channels = 1;
    m.classes = 2;
    m.w1 = {0.7, -0.4, 0.0, 0.2, 0.9, 0.0};
    m.b1 = {0.0, 0.1};

    const std::vector<double> x1 = {0.3, 0.6, 0.1};
    std::vector<double> x2 = x1;
    x2[2] = 0.9;  // moves only along the null direction
    CHECK(logits(m, x1) == logits(m, x2));
    CHECK(input_gradient(m, x1, 0) == input_gradient(m, x2, 0));
}

TEST_CASE("fgsm pixel mechanics") {
    TinyClassifier m = one_pixel_model(5.0);
    SUBCASE("moves along the gradient sign by epsilon") {
        Image img{1, 1, 1, {0.5}};
        Image adv = fgsm(m, img, 1, 0.3, 1);
        CHECK(adv.pixels[0] == doctest::Approx(0.8).epsilon(1e-12));
    }
    SUBCASE("clips at the pixel range") {
        Image img{1, 1, 1, {0.9}};
        Image adv = fgsm(m, img, 1, 0.3, 1);
        CHECK(adv.pixels[0] == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("zero gradient leaves the image unchanged") {
        TinyClassifier flat = one_pixel_model(0.0);
        flat.w1 = {0.0, 0.0};
        Image img{1, 1, 1, {0.5}};
        Image adv = fgsm(flat, img, 1, 0.3, 4);
        CHECK(adv.pixels[0] == 0.5);
    }
    SUBCASE("epsilon outside (0,1] rejected") {
        Image img{1, 1, 1, {0.5}};
        CHECK_THROWS_AS(fgsm(m, img, 1, 0.0, 1), std::invalid_argument);
        CHECK_THROWS_AS(fgsm(m, img, 1, 1.5, 1), std::invalid_argument);
    }
}

TEST_CASE("every attack respects the budget and the pixel range") {
    TinyClassifier model = blob_model();
    std::vector<Image> images;
    std::vector<int> labels;
    make_blobs(84, 85, images, labels);

    int trials = 0;
    for (std::size_t i = 0; i < images.size(); ++i) {
        for (double eps : {0.01, 0.1, 0.3}) {
            AttackConfig cfg;
            cfg.epsilon = eps;
            cfg.steps = 5;
            cfg.seed = 1000 + i;
            for (AttackKind kind : {AttackKind::Fgsm, AttackKind::Pgd, AttackKind::Momentum,
                                    AttackKind::RandomSign}) {
                cfg.kind = kind;
                const Image adv = run_attack(model, images[i], labels[i], cfg, i);
                CHECK(linf(adv, images[i]) <= eps + 1e-12);
                for (double v : adv.pixels) {
                    CHECK(v >= 0.0);
                    CHECK(v <= 1.0);
                }
                ++trials;
            }
        }
    }
    CHECK(trials >= 1000);
}

TEST_CASE("pgd reductions and reproducibility") {
    TinyClassifier model = blob_model();
    std::vector<Image> images;
    std::vector<int> labels;
    make_blobs(6, 86, images, labels);

    SUBCASE("one step without random start equals single-step fgsm") {
        for (std::size_t i = 0; i < images.size(); ++i) {
            const Image a = pgd(model, images[i], labels[i], 0.2, 1, 0.2, 0, false);
            const Image b = fgsm(model, images[i], labels[i], 0.2, 1);
            CHECK(a.pixels == b.pixels);
        }
    }
    SUBCASE("fixed seed reproduces the random start") {
        const Image a = pgd(model, images[0], labels[0], 0.2, 4, 0.05, 42, true);
        const Image b = pgd(model, images[0], labels[0], 0.2, 4, 0.05, 42, true);
        const Image c = pgd(model, images[0], labels[0], 0.2, 4, 0.05, 43, true);
        CHECK(a.pixels == b.pixels);
        CHECK_FALSE(a.pixels == c.pixels);
    }
    SUBCASE("step size must not exceed epsilon") {
        CHECK_THROWS_AS(pgd(model, images[0], labels[0], 0.1, 4, 0.2, 0, true),
                        std::invalid_argument);
    }
}

TEST_CASE("momentum attack properties") {
    TinyClassifier model = blob_model();
    std::vector<Image> images;
    std::vector<int> labels;
    make_blobs(6, 87, images, labels);

    SUBCASE("mu = 0 reduces to iterative fgsm") {
        for (std::size_t i = 0; i < images.size(); ++i) {
            const Image a = momentum_attack(model, images[i], labels[i], 0.12, 6, 0.0);
            const Image b = fgsm(model, images[i], labels[i], 0.12, 6);
            CHECK(a.pixels == b.pixels);
        }
    }
    SUBCASE("binary linear model accumulates a constant direction") {
        // two-class model: gradient is p0 * (w0 - w1), a fixed direction
        TinyClassifier m;
        m.arch = TinyClassifier::Arch::SoftmaxLinear;
        m.rows = 2;
        m.cols = 2;
        m.channels = 1;
        m.classes = 2;
        m.w1 = {0.9, -0.3, 0.4, 0.2, -0.5, 0.8, 0.1, -0.6};
        m.b1 = {0.0, 0.0};
        Image img{2, 2, 1, {0.5, 0.5, 0.5, 0.5}};
        const Image with_momentum = momentum_attack(m, img, 1, 0.2, 5, 1.0);
        const Image plain = fgsm(m, img, 1, 0.2, 5);
        CHECK(with_momentum.pixels == plain.pixels);
    }
}

TEST_CASE("random sign perturbation") {
    Image img{2, 2, 1, {0.4, 0.45, 0.5, 0.55}};
    SUBCASE("deterministic per seed") {
        const Image a = random_sign_perturbation(img, 0.2, 7);
        const Image b = random_sign_perturbation(img, 0.2, 7);
        const Image c = random_sign_perturbation(img, 0.2, 8);
        CHECK(a.pixels == b.pixels);
        CHECK_FALSE(a.pixels == c.pixels);
    }
    SUBCASE("shift is exactly epsilon away from unclipped pixels") {
        const Image a = random_sign_perturbation(img, 0.3, 7);
        for (std::size_t i = 0; i < a.pixels.size(); ++i)
            CHECK(std::abs(a.pixels[i] - img.pixels[i]) == doctest::Approx(0.3).epsilon(1e-12));
    }
    SUBCASE("epsilon zero is the identity") {
        const Image a = random_sign_perturbation(img, 0.0, 7);
        CHECK(a.pixels == img.pixels);
    }
}

TEST_CASE("attack success grows with epsilon") {
    TinyClassifier model = blob_model();
    std::vector<Image> images;
    std::vector<int> labels;
    make_blobs(120, 88, images, labels);

    auto success_rate = [&](double eps) {
        int fooled = 0;
        for (std::size_t i = 0; i < images.size(); ++i) {
            if (predict_class(model, images[i].pixels) != labels[i]) continue;
            const Image adv = fgsm(model, images[i], labels[i], eps, 5);
            if (predict_class(model, adv.pixels) != labels[i]) ++fooled;
        }
        return static_cast<double>(fooled) / images.size();
    };
    CHECK(success_rate(0.3) >= success_rate(0.01));
}

TEST_CASE("rank-k compression undoes small attacks better than large ones") {
    // digit corpus and a small model: attack at two strengths, truncate to
    // the leading triples, compare how often the original label comes back
    std::vector<Image> train, test;
    std::vector<int> train_labels, test_labels;
    synth::make_digit_corpus(600, 0xc0de, train, train_labels);
    synth::make_digit_corpus(120, 0xc0df, test, test_labels);
    TrainConfig tc;
    tc.arch = TinyClassifier::Arch::OneHidden;
    tc.hidden = 24;
    tc.epochs = 3;
    tc.learning_rate = 0.03;
    tc.seed = 19;
    TinyClassifier model = train_classifier(train, train_labels, tc);
    REQUIRE(model.meta.final_val_accuracy >= 0.9);

    auto restoration_rate = [&](double eps) {
        int fooled = 0, restored = 0;
        for (std::size_t i = 0; i < test.size(); ++i) {
            if (predict_class(model, test[i].pixels) != test_labels[i]) continue;
            const Image adv = fgsm(model, test[i], test_labels[i], eps, 10);
            if (predict_class(model, adv.pixels) == test_labels[i]) continue;
            ++fooled;
            const Image comp = to_image_clamped(truncate(compute_svd(to_image_matrix(adv)), 9));
            if (predict_class(model, comp.pixels) == test_labels[i]) ++restored;
        }
        return fooled == 0 ? 1.0 : static_cast<double>(restored) / fooled;
    };
    CHECK(restoration_rate(0.02) >= restoration_rate(0.3));
}

TEST_CASE("model checkpoint round-trip") {
    TinyClassifier m = blob_model();
    const std::string path = scratch_path("blob.tclf");
    save_model(m, path);
    TinyClassifier loaded = load_model(path);
    CHECK(loaded.same_weights(m));
    CHECK(loaded.rows == m.rows);
    CHECK(loaded.classes == m.classes);
    CHECK(loaded.meta.seed == m.meta.seed);
    CHECK(loaded.meta.final_val_accuracy == m.meta.final_val_accuracy);

    SUBCASE("bad magic rejected") {
        const std::string bad = scratch_path("bad_magic.tclf");
        std::ofstream f(bad, std::ios::binary);
        f << "NOPE1234";
        f.close();
        CHECK_THROWS_AS(load_model(bad), DataError);
    }
    SUBCASE("truncated payload rejected") {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        in.close();
        const std::string cut = scratch_path("truncated.tclf");
        std::ofstream f(cut, std::ios::binary);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
        f.close();
        CHECK_THROWS_AS(load_model(cut), DataError);
    }
}
