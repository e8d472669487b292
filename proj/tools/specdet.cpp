// Command-line front end: dataset ingestion -> attacks -> calibration ->
// detection -> diagnostics, with CSV outputs and a JSON manifest next to
// every artifact. Exit codes: 0 success, 2 usage, 3 data error, 4 numerical
// failure.
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "specdet/attack.hpp"
#include "specdet/classifier.hpp"
#include "specdet/dataset.hpp"
#include "specdet/detector.hpp"
#include "specdet/manifest.hpp"
#include "specdet/perturbation.hpp"
#include "specdet/svd.hpp"

using namespace specdet;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct SourceFlags {
    std::string dataset;   // mnist | cifar10
    std::string data_dir;  // falls back to DATASET_DIR
    std::string split = "test";
    std::string images_path;           // explicit IDX pair
    std::string labels_path;
    std::vector<std::string> cifar_paths;  // explicit CIFAR batches
    int count = 0;                         // 0 = all
};

void add_source_flags(CLI::App* cmd, SourceFlags& src, const std::string& default_split) {
    src.split = default_split;
    cmd->add_option("--dataset", src.dataset, "canonical dataset layout: mnist or cifar10")
        ->check(CLI::IsMember({"mnist", "cifar10"}));
    cmd->add_option("--data-dir", src.data_dir,
                    "directory with the canonical files (default: $DATASET_DIR)");
    cmd->add_option("--split", src.split, "train or test split")
        ->check(CLI::IsMember({"train", "test"}));
    cmd->add_option("--images", src.images_path, "explicit IDX image file");
    cmd->add_option("--labels", src.labels_path, "explicit IDX label file");
    cmd->add_option("--cifar", src.cifar_paths, "explicit CIFAR-10 binary batch file(s)");
    cmd->add_option("--count", src.count, "use only the first N images");
}

LabeledDataset load_source(const SourceFlags& src) {
    LabeledDataset ds;
    if (!src.images_path.empty()) {
        if (src.labels_path.empty())
            throw std::invalid_argument("--images requires --labels (IDX files come in pairs)");
        ds = load_mnist_idx(src.images_path, src.labels_path);
    } else if (!src.cifar_paths.empty()) {
        ds = load_cifar10_binary(src.cifar_paths);
    } else if (!src.dataset.empty()) {
        std::string dir = src.data_dir;
        if (dir.empty()) {
            const char* env = std::getenv("DATASET_DIR");
            if (env) dir = env;
        }
        if (dir.empty())
            throw DataError("no --data-dir given and DATASET_DIR is not set");
        if (src.dataset == "mnist") {
            const std::string prefix = src.split == "train" ? "train" : "t10k";
            ds = load_mnist_idx(dir + "/" + prefix + "-images-idx3-ubyte",
                                dir + "/" + prefix + "-labels-idx1-ubyte");
        } else {
            std::vector<std::string> paths;
            if (src.split == "train")
                for (int i = 1; i <= 5; ++i)
                    paths.push_back(dir + "/data_batch_" + std::to_string(i) + ".bin");
            else
                paths.push_back(dir + "/test_batch.bin");
            ds = load_cifar10_binary(paths);
        }
    } else {
        throw std::invalid_argument(
            "no input: give --dataset/--data-dir, --images/--labels, or --cifar");
    }
    if (src.count > 0 && static_cast<int>(ds.images.size()) > src.count) {
        ds.images.resize(src.count);
        ds.labels.resize(src.count);
    }
    if (ds.images.empty()) throw DataError("input dataset is empty");
    return ds;
}

void write_text(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open " + path);
    out << body;
    if (!out) throw DataError("write failed for " + path);
}

std::map<std::string, std::string> source_flag_map(const SourceFlags& src) {
    std::map<std::string, std::string> m;
    if (!src.dataset.empty()) m["dataset"] = src.dataset;
    if (!src.data_dir.empty()) m["data_dir"] = src.data_dir;
    m["split"] = src.split;
    if (!src.images_path.empty()) m["images"] = src.images_path;
    if (!src.labels_path.empty()) m["labels"] = src.labels_path;
    for (std::size_t i = 0; i < src.cifar_paths.size(); ++i)
        m["cifar." + std::to_string(i)] = src.cifar_paths[i];
    if (src.count > 0) m["count"] = std::to_string(src.count);
    return m;
}

/// Attacked/compressed datasets are written as a stem: an IDX pair for
/// single-channel data, one CIFAR batch otherwise.
void write_dataset_stem(const std::string& stem, const std::vector<Image>& images,
                        const std::vector<int>& labels, bool as_float) {
    if (images.front().channels == 1)
        write_mnist_idx(images, labels, stem + "-images.idx", stem + "-labels.idx", as_float);
    else
        write_cifar10_binary(images, labels, stem + ".bin", as_float);
}

LabeledDataset load_dataset_stem(const std::string& stem) {
    if (fs::exists(stem + "-images.idx"))
        return load_mnist_idx(stem + "-images.idx", stem + "-labels.idx");
    if (fs::exists(stem + ".bin")) return load_cifar10_binary({stem + ".bin"});
    throw DataError("no dataset found at stem '" + stem + "'");
}

TinyClassifier::Arch parse_arch(const std::string& name) {
    if (name == "linear") return TinyClassifier::Arch::SoftmaxLinear;
    if (name == "mlp" || name == "one-hidden") return TinyClassifier::Arch::OneHidden;
    throw CLI::ValidationError("--arch must be linear or mlp");
}

struct HistogramPair {
    std::vector<double> a, b;
    std::string label_a, label_b;
};

/// Log-bucket text histogram of two rho samples, side by side.
void print_rho_histogram(const HistogramPair& h) {
    double lo = 1e308, hi = 0.0;
    for (const auto* v : {&h.a, &h.b})
        for (double x : *v) {
            if (x > 0.0) lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
    if (hi <= 0.0) {
        std::printf("rho histogram: all values zero\n");
        return;
    }
    lo = std::max(lo, hi * 1e-12);
    const int buckets = 24;
    const double log_lo = std::log10(lo), log_hi = std::log10(hi * 1.0000001);
    const double width = (log_hi - log_lo) / buckets;
    std::vector<int> ca(buckets + 1, 0), cb(buckets + 1, 0);
    auto place = [&](double x) {
        if (x <= 0.0) return 0;
        return 1 + std::min(buckets - 1,
                            static_cast<int>((std::log10(x) - log_lo) / width));
    };
    for (double x : h.a) ++ca[place(x)];
    for (double x : h.b) ++cb[place(x)];
    int peak = 1;
    for (int i = 0; i <= buckets; ++i) peak = std::max({peak, ca[i], cb[i]});
    std::printf("rho histogram (log buckets)  %s='#'  %s='o'\n", h.label_a.c_str(),
                h.label_b.c_str());
    for (int i = 0; i <= buckets; ++i) {
        if (ca[i] == 0 && cb[i] == 0) continue;
        if (i == 0)
            std::printf("  %-11s |", "0");
        else
            std::printf("  %-11.3e |", std::pow(10.0, log_lo + (i - 1) * width));
        const int na = ca[i] * 40 / peak, nb = cb[i] * 40 / peak;
        for (int j = 0; j < na; ++j) std::printf("#");
        std::printf("%s", na || nb ? " " : "");
        for (int j = 0; j < nb; ++j) std::printf("o");
        std::printf("  (%d, %d)\n", ca[i], cb[i]);
    }
}

// ---- command implementations ----

int cmd_train_model(const SourceFlags& src, const std::string& arch, int hidden, int epochs,
                    double lr, double lr_decay, double val_frac, std::uint64_t seed,
                    const std::string& out) {
    const auto t0 = Clock::now();
    LabeledDataset ds = load_source(src);

    TrainConfig cfg;
    cfg.arch = parse_arch(arch);
    cfg.hidden = hidden;
    cfg.epochs = epochs;
    cfg.learning_rate = lr;
    cfg.lr_decay = lr_decay;
    cfg.val_fraction = val_frac;
    cfg.seed = seed;
    TinyClassifier model = train_classifier(ds.images, ds.labels, cfg);
    save_model(model, out);

    RunManifest man;
    man.command = "train-model";
    man.flags = source_flag_map(src);
    man.flags["arch"] = arch;
    man.flags["hidden"] = std::to_string(hidden);
    man.flags["epochs"] = std::to_string(epochs);
    man.flags["lr"] = fmt_g17(lr);
    man.flags["lr_decay"] = fmt_g17(lr_decay);
    man.flags["val_fraction"] = fmt_g17(val_frac);
    man.flags["out"] = out;
    man.seed = seed;
    man.dataset_checksums.emplace_back(ds.name, ds.checksum);
    man.duration_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    save_manifest(man, out + ".manifest.json");

    std::printf("trained %s on %zu images: train accuracy %.4f, validation accuracy %.4f\n",
                arch.c_str(), ds.images.size(), model.meta.final_train_accuracy,
                model.meta.final_val_accuracy);
    std::printf("model written to %s\n", out.c_str());
    return 0;
}

int cmd_calibrate(const SourceFlags& src, double alpha, double plo, double phi, double coverage,
                  int min_train, const std::string& label, const std::string& out) {
    const auto t0 = Clock::now();
    LabeledDataset ds = load_source(src);

    CalibrateOptions opt;
    opt.alpha = alpha;
    opt.percentile_lo = plo;
    opt.percentile_hi = phi;
    opt.coverage = coverage;
    opt.min_train = min_train;
    opt.dataset_label = label.empty() ? ds.name : label;
    CalibrationProfile profile = calibrate(ds.images, opt);
    save_profile(profile, out);

    RunManifest man;
    man.command = "calibrate";
    man.flags = source_flag_map(src);
    man.flags["alpha"] = fmt_g17(alpha);
    man.flags["percentile_lo"] = fmt_g17(plo);
    man.flags["percentile_hi"] = fmt_g17(phi);
    man.flags["coverage"] = fmt_g17(coverage);
    man.flags["out"] = out;
    man.profile_path = out;
    man.dataset_checksums.emplace_back(ds.name, ds.checksum);
    man.duration_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    save_manifest(man, out + ".manifest.json");

    std::printf("calibrated on %zu images: m = %d, L = %s, U = %s\n", ds.images.size(), profile.m,
                fmt_g17(profile.lower).c_str(), fmt_g17(profile.upper).c_str());
    std::printf("profile written to %s\n", out.c_str());
    return 0;
}

int cmd_attack(const SourceFlags& src, const std::string& model_path, const std::string& kind_name,
               double eps, int steps, double step_size, double mu, std::uint64_t seed,
               const std::string& pixel_format, const std::string& out) {
    const auto t0 = Clock::now();
    LabeledDataset ds = load_source(src);
    TinyClassifier model;
    const bool model_free = kind_name == "random_sign";
    if (!model_free) {
        if (model_path.empty()) throw DataError("--model is required for gradient attacks");
        model = load_model(model_path);
        if (model.rows != ds.images.front().rows || model.cols != ds.images.front().cols ||
            model.channels != ds.images.front().channels)
            throw DataError("model dimensions do not match the dataset");
    }

    AttackConfig cfg;
    cfg.kind = attack_kind_from_name(kind_name);
    cfg.epsilon = eps;
    cfg.steps = steps;
    cfg.step_size = step_size;
    cfg.momentum_decay = mu;
    cfg.seed = seed;

    std::vector<Image> attacked;
    attacked.reserve(ds.images.size());
    std::string success_csv = "image_id,true_label,clean_pred,adv_pred,attack_success\n";
    int fooled = 0;
    for (std::size_t i = 0; i < ds.images.size(); ++i) {
        Image adv = model_free
                        ? random_sign_perturbation(ds.images[i], eps, mix_seed(seed, i))
                        : run_attack(model, ds.images[i], ds.labels[i], cfg, i);
        int clean_pred = -1, adv_pred = -1;
        if (!model_free) {
            clean_pred = predict_class(model, ds.images[i].pixels);
            adv_pred = predict_class(model, adv.pixels);
            if (clean_pred == ds.labels[i] && adv_pred != ds.labels[i]) ++fooled;
        }
        success_csv += std::to_string(i) + ',' + std::to_string(ds.labels[i]) + ',' +
                       std::to_string(clean_pred) + ',' + std::to_string(adv_pred) + ',' +
                       ((clean_pred >= 0 && clean_pred == ds.labels[i] && adv_pred != ds.labels[i])
                            ? "1"
                            : "0") +
                       "\n";
        attacked.push_back(std::move(adv));
    }

    write_dataset_stem(out, attacked, ds.labels, pixel_format == "f64");
    write_text(out + "-success.csv", success_csv);

    RunManifest man;
    man.command = "attack";
    man.flags = source_flag_map(src);
    man.flags["kind"] = kind_name;
    man.flags["eps"] = fmt_g17(eps);
    man.flags["steps"] = std::to_string(steps);
    man.flags["step_size"] = fmt_g17(step_size);
    man.flags["mu"] = fmt_g17(mu);
    man.flags["model"] = model_path;
    man.flags["pixel_format"] = pixel_format;
    man.flags["out"] = out;
    man.seed = seed;
    man.dataset_checksums.emplace_back(ds.name, ds.checksum);
    man.duration_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    save_manifest(man, out + "-manifest.json");

    std::printf("attacked %zu images with %s at eps = %s", ds.images.size(), kind_name.c_str(),
                fmt_g17(eps).c_str());
    if (!model_free)
        std::printf("; attack success %.1f%%", 100.0 * fooled / ds.images.size());
    std::printf("\noutputs at stem %s\n", out.c_str());
    return 0;
}

int cmd_evaluate(const SourceFlags& clean_src, const std::vector<std::string>& attacked_stems,
                 const std::string& profile_path, const std::string& out) {
    const auto t0 = Clock::now();
    if (attacked_stems.empty()) throw DataError("evaluate: give at least one --attacked stem");
    CalibrationProfile profile = load_profile(profile_path);
    LabeledDataset clean = load_source(clean_src);

    std::string summary = "set,kind,eps,total,flagged,rate\n";
    RunManifest man;
    man.command = "evaluate";
    man.flags = source_flag_map(clean_src);
    man.profile_path = profile_path;
    man.dataset_checksums.emplace_back(clean.name + ".clean", clean.checksum);

    // clean control row: the flagged fraction is the false positive rate
    int clean_flagged = 0;
    {
        std::string rows = "image_id,rho,verdict,truth\n";
        for (std::size_t i = 0; i < clean.images.size(); ++i) {
            const Verdict v = classify(clean.images[i], profile);
            const bool flagged = v.label == Label::Adversarial;
            clean_flagged += flagged;
            rows += std::to_string(i) + ',' + fmt_g17(v.rho) + ',' +
                    (flagged ? "adversarial" : "clean") + ",clean\n";
        }
        write_text(out + "-rows-clean.csv", rows);
        summary += "clean,none,0," + std::to_string(clean.images.size()) + ',' +
                   std::to_string(clean_flagged) + ',' +
                   fmt_g17(static_cast<double>(clean_flagged) / clean.images.size()) + "\n";
    }

    for (const std::string& stem : attacked_stems) {
        LabeledDataset adv = load_dataset_stem(stem);
        std::string kind = "unknown";
        std::string eps = "nan";
        const std::string manifest_path = stem + "-manifest.json";
        if (fs::exists(manifest_path)) {
            const nlohmann::json j = load_manifest_json(manifest_path);
            if (j.contains("flags")) {
                if (j["flags"].contains("kind")) kind = j["flags"]["kind"].get<std::string>();
                if (j["flags"].contains("eps")) eps = j["flags"]["eps"].get<std::string>();
            }
        }
        DetectionReport rep = evaluate(clean.images, adv.images, profile);
        const std::string set_name = fs::path(stem).filename().string();
        std::string rows = "image_id,rho,verdict,truth\n";
        for (const DetectionRow& r : rep.rows) {
            if (!r.truth_adversarial) continue;
            rows += std::to_string(r.image_id - rep.total_clean) + ',' + fmt_g17(r.rho) + ',' +
                    (r.flagged ? "adversarial" : "clean") + ",adversarial\n";
        }
        write_text(out + "-rows-" + set_name + ".csv", rows);
        summary += set_name + ',' + kind + ',' + eps + ',' +
                   std::to_string(rep.total_adversarial) + ',' +
                   std::to_string(rep.flagged_adversarial) + ',' + fmt_g17(rep.detection_rate) +
                   "\n";
        man.dataset_checksums.emplace_back(set_name, adv.checksum);
        std::printf("%-24s kind=%-11s eps=%-10s detection rate %.4f\n", set_name.c_str(),
                    kind.c_str(), eps.c_str(), rep.detection_rate);
    }
    std::printf("clean control: %d of %zu flagged (false positive rate %.4f)\n", clean_flagged,
                clean.images.size(), static_cast<double>(clean_flagged) / clean.images.size());

    write_text(out + "-summary.csv", summary);
    man.flags["out"] = out;
    man.duration_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    save_manifest(man, out + "-manifest.json");
    return 0;
}

int cmd_classify(const SourceFlags& src, const std::string& profile_path, const std::string& out) {
    const auto t0 = Clock::now();
    CalibrationProfile profile = load_profile(profile_path);
    LabeledDataset ds = load_source(src);
    std::string rows = "image_id,rho,verdict\n";
    int flagged = 0;
    for (std::size_t i = 0; i < ds.images.size(); ++i) {
        const Verdict v = classify(ds.images[i], profile);
        const bool adv = v.label == Label::Adversarial;
        flagged += adv;
        rows += std::to_string(i) + ',' + fmt_g17(v.rho) + ',' + (adv ? "adversarial" : "clean") +
                "\n";
    }
    if (!out.empty()) {
        write_text(out, rows);
        RunManifest man;
        man.command = "classify";
        man.flags = source_flag_map(src);
        man.flags["out"] = out;
        man.profile_path = profile_path;
        man.dataset_checksums.emplace_back(ds.name, ds.checksum);
        man.duration_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        save_manifest(man, out + ".manifest.json");
    }
    std::printf("%d of %zu images flagged adversarial\n", flagged, ds.images.size());
    if (!out.empty()) std::printf("verdicts written to %s\n", out.c_str());
    return 0;
}

int cmd_diagnose(const SourceFlags& clean_src, const std::string& attacked_stem,
                 const std::string& profile_path, int single_index, const std::string& out) {
    const auto t0 = Clock::now();
    CalibrationProfile profile = load_profile(profile_path);
    LabeledDataset clean = load_source(clean_src);
    LabeledDataset adv = load_dataset_stem(attacked_stem);
    auto write_diag_manifest = [&]() {
        RunManifest man;
        man.command = "diagnose";
        man.flags = source_flag_map(clean_src);
        man.flags["attacked"] = attacked_stem;
        if (single_index >= 0) man.flags["index"] = std::to_string(single_index);
        man.flags["out"] = out;
        man.profile_path = profile_path;
        man.dataset_checksums.emplace_back(clean.name + ".clean", clean.checksum);
        man.dataset_checksums.emplace_back("attacked", adv.checksum);
        man.duration_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        save_manifest(man, out + ".manifest.json");
    };
    const std::size_t n = std::min(clean.images.size(), adv.images.size());
    if (n == 0) throw DataError("diagnose: no image pairs");

    if (single_index >= 0) {
        if (static_cast<std::size_t>(single_index) >= n)
            throw DataError("diagnose: --index out of range");
        PerturbationReport rep = perturbation_report(
            to_image_matrix(clean.images[single_index]), to_image_matrix(adv.images[single_index]));
        write_text(out, to_csv(rep));
        write_diag_manifest();
        std::printf("pair %d: ||E||_2 = %s, ||E||_F = %s, bound violations = %d\n", single_index,
                    fmt_g17(rep.e_norm2).c_str(), fmt_g17(rep.e_norm_f).c_str(), rep.violations);
        std::printf("report written to %s\n", out.c_str());
        return 0;
    }

    // aggregate mode: per-index medians across all pairs plus rho histograms
    const int p = profile.spectrum_size;
    std::vector<std::vector<double>> rel(p), lsin(p), rsin(p);
    std::vector<int> violations(p, 0);
    HistogramPair hist;
    hist.label_a = "clean";
    hist.label_b = "attacked";
    int total_violations = 0;
    for (std::size_t i = 0; i < n; ++i) {
        PerturbationReport rep =
            perturbation_report(to_image_matrix(clean.images[i]), to_image_matrix(adv.images[i]));
        for (const PerturbationRecord& r : rep.records) {
            rel[r.index - 1].push_back(r.rel_change);
            lsin[r.index - 1].push_back(r.left_angle_sin);
            rsin[r.index - 1].push_back(r.right_angle_sin);
            if (r.weyl_margin < -1e-9) ++violations[r.index - 1];
        }
        total_violations += rep.violations;
        hist.a.push_back(rho(compute_svd(to_image_matrix(clean.images[i])), profile.m));
        hist.b.push_back(rho(compute_svd(to_image_matrix(adv.images[i])), profile.m));
    }
    auto median = [](std::vector<double>& v) {
        if (v.empty()) return 0.0;
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    std::string csv = "index,median_rel_change,median_left_angle_sin,median_right_angle_sin,"
                      "bound_violations\n";
    for (int i = 0; i < p; ++i)
        csv += std::to_string(i + 1) + ',' + fmt_g17(median(rel[i])) + ',' +
               fmt_g17(median(lsin[i])) + ',' + fmt_g17(median(rsin[i])) + ',' +
               std::to_string(violations[i]) + "\n";
    write_text(out, csv);
    write_diag_manifest();

    print_rho_histogram(hist);
    std::printf("%zu pairs diagnosed, %d bound violations; report written to %s\n", n,
                total_violations, out.c_str());
    return 0;
}

int cmd_compress(const SourceFlags& src, int k, const std::string& model_path,
                 const std::string& pixel_format, const std::string& out) {
    const auto t0 = Clock::now();
    LabeledDataset ds = load_source(src);
    TinyClassifier model;
    const bool with_model = !model_path.empty();
    if (with_model) model = load_model(model_path);

    std::vector<Image> compressed;
    compressed.reserve(ds.images.size());
    std::string rows = "image_id,energy_fraction,label,pred_before,pred_after\n";
    double r_sum = 0.0;
    int restored = 0, changed_before = 0;
    for (std::size_t i = 0; i < ds.images.size(); ++i) {
        const SvdResult svd = compute_svd(to_image_matrix(ds.images[i]));
        if (k > svd.spectrum_size())
            throw DataError("compress: k exceeds the spectrum size P = " +
                            std::to_string(svd.spectrum_size()));
        const double r = energy_fraction(svd, k);
        r_sum += r;
        Image comp = to_image_clamped(truncate(svd, k));
        int before = -1, after = -1;
        if (with_model) {
            before = predict_class(model, ds.images[i].pixels);
            after = predict_class(model, comp.pixels);
            if (before != ds.labels[i]) {
                ++changed_before;
                if (after == ds.labels[i]) ++restored;
            }
        }
        rows += std::to_string(i) + ',' + fmt_g17(r) + ',' + std::to_string(ds.labels[i]) + ',' +
                std::to_string(before) + ',' + std::to_string(after) + "\n";
        compressed.push_back(std::move(comp));
    }
    write_dataset_stem(out, compressed, ds.labels, pixel_format == "f64");
    write_text(out + "-report.csv", rows);
    RunManifest man;
    man.command = "compress";
    man.flags = source_flag_map(src);
    man.flags["k"] = std::to_string(k);
    if (!model_path.empty()) man.flags["model"] = model_path;
    man.flags["pixel_format"] = pixel_format;
    man.flags["out"] = out;
    man.dataset_checksums.emplace_back(ds.name, ds.checksum);
    man.duration_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    save_manifest(man, out + "-manifest.json");

    std::printf("compressed %zu images at k = %d: mean energy fraction %.6f\n", ds.images.size(),
                k, r_sum / ds.images.size());
    if (with_model && changed_before > 0)
        std::printf("label restoration: %d of %d misclassified inputs recovered\n", restored,
                    changed_before);
    std::printf("outputs at stem %s\n", out.c_str());
    return 0;
}

int cmd_rotate(const SourceFlags& src, const std::string& profile_path, std::uint64_t seed,
               const std::string& out) {
    const auto t0 = Clock::now();
    CalibrationProfile profile = load_profile(profile_path);
    LabeledDataset ds = load_source(src);
    std::string rows =
        "image_id,rho_before,rho_after,rel_change,verdict_before,verdict_after\n";
    double worst = 0.0;
    int verdict_changes = 0;
    for (std::size_t i = 0; i < ds.images.size(); ++i) {
        const ImageMatrix x = to_image_matrix(ds.images[i]);
        const RotationPair r = random_rotation(x.rows(), x.cols(), mix_seed(seed, i));
        const Verdict before = classify_matrix(x, profile);
        const Verdict after = classify_matrix(rotate(x, r), profile);
        const double rel =
            std::abs(after.rho - before.rho) / std::max(before.rho, 1e-12);
        worst = std::max(worst, rel);
        verdict_changes += before.label != after.label;
        rows += std::to_string(i) + ',' + fmt_g17(before.rho) + ',' + fmt_g17(after.rho) + ',' +
                fmt_g17(rel) + ',' +
                (before.label == Label::Adversarial ? "adversarial" : "clean") + ',' +
                (after.label == Label::Adversarial ? "adversarial" : "clean") + "\n";
    }
    if (!out.empty()) {
        write_text(out, rows);
        RunManifest man;
        man.command = "rotate";
        man.flags = source_flag_map(src);
        man.flags["out"] = out;
        man.profile_path = profile_path;
        man.seed = seed;
        man.dataset_checksums.emplace_back(ds.name, ds.checksum);
        man.duration_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        save_manifest(man, out + ".manifest.json");
    }
    std::printf("rotated %zu image matrices: max relative rho change %.3e, %d verdict changes\n",
                ds.images.size(), worst, verdict_changes);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spectral adversarial-image detector"};
    app.set_version_flag("--version", std::string("specdet ") + kToolVersion);
    app.require_subcommand(1);

    // train-model
    SourceFlags train_src;
    std::string tm_arch = "linear", tm_out = "model.tclf";
    int tm_hidden = 32, tm_epochs = 10;
    double tm_lr = 0.1, tm_decay = 0.95, tm_val = 0.1;
    std::uint64_t tm_seed = 1;
    CLI::App* tm = app.add_subcommand("train-model", "train the tiny attack-surrogate classifier");
    add_source_flags(tm, train_src, "train");
    tm->add_option("--arch", tm_arch, "linear or mlp");
    tm->add_option("--hidden", tm_hidden, "hidden width for mlp");
    tm->add_option("--epochs", tm_epochs);
    tm->add_option("--lr", tm_lr, "learning rate");
    tm->add_option("--lr-decay", tm_decay, "per-epoch learning-rate decay");
    tm->add_option("--val-frac", tm_val, "trailing validation fraction");
    tm->add_option("--seed", tm_seed);
    tm->add_option("--out", tm_out)->required();

    // calibrate
    SourceFlags cal_src;
    double cal_alpha = 0.01, cal_plo = 5.0, cal_phi = 95.0, cal_cov = 0.95;
    int cal_min = 100;
    std::string cal_label, cal_out = "profile.txt";
    CLI::App* cal = app.add_subcommand("calibrate", "fit the detector thresholds on clean images");
    add_source_flags(cal, cal_src, "train");
    cal->add_option("--alpha", cal_alpha, "relative cutoff defining the tail index m");
    cal->add_option("--percentile-lo", cal_plo);
    cal->add_option("--percentile-hi", cal_phi);
    cal->add_option("--coverage", cal_cov, "fraction of images that must reach the cutoff");
    cal->add_option("--min-train", cal_min, "minimum training-set size");
    cal->add_option("--label", cal_label, "profile label (defaults to the dataset name)");
    cal->add_option("--out", cal_out)->required();

    // attack
    SourceFlags atk_src;
    std::string atk_model, atk_kind = "fgsm", atk_fmt = "f64", atk_out = "attacked";
    double atk_eps = 0.1, atk_step = 0.0, atk_mu = 1.0;
    int atk_steps = 10;
    std::uint64_t atk_seed = 0;
    CLI::App* atk = app.add_subcommand("attack", "generate an adversarial dataset");
    add_source_flags(atk, atk_src, "test");
    atk->add_option("--model", atk_model, "TCLF checkpoint of the classifier to attack");
    atk->add_option("--kind", atk_kind)->check(CLI::IsMember({"fgsm", "pgd", "momentum",
                                                              "random_sign"}));
    atk->add_option("--eps", atk_eps, "max-norm budget")->required();
    atk->add_option("--steps", atk_steps);
    atk->add_option("--step-size", atk_step, "pgd step size (default eps/4)");
    atk->add_option("--mu", atk_mu, "momentum decay");
    atk->add_option("--seed", atk_seed);
    atk->add_option("--pixel-format", atk_fmt, "f64 keeps attacked pixels exact; u8 is canonical")
        ->check(CLI::IsMember({"f64", "u8"}));
    atk->add_option("--out", atk_out, "output stem")->required();

    // evaluate
    SourceFlags ev_src;
    std::vector<std::string> ev_attacked;
    std::string ev_profile, ev_out = "evaluation";
    CLI::App* ev = app.add_subcommand("evaluate", "detection rates over clean and attacked sets");
    add_source_flags(ev, ev_src, "test");
    ev->add_option("--attacked", ev_attacked, "attacked dataset stem(s)")->required();
    ev->add_option("--profile", ev_profile)->required();
    ev->add_option("--out", ev_out, "output stem");

    // classify
    SourceFlags cls_src;
    std::string cls_profile, cls_out;
    CLI::App* cls = app.add_subcommand("classify", "per-image clean/adversarial verdicts");
    add_source_flags(cls, cls_src, "test");
    cls->add_option("--profile", cls_profile)->required();
    cls->add_option("--out", cls_out, "verdict CSV path");

    // diagnose
    SourceFlags dg_src;
    std::string dg_attacked, dg_profile, dg_out = "diagnosis.csv";
    int dg_index = -1;
    CLI::App* dg = app.add_subcommand("diagnose",
                                      "spectral perturbation report for clean/attacked pairs");
    add_source_flags(dg, dg_src, "test");
    dg->add_option("--attacked", dg_attacked, "attacked dataset stem")->required();
    dg->add_option("--profile", dg_profile)->required();
    dg->add_option("--index", dg_index, "report one pair in full instead of medians");
    dg->add_option("--out", dg_out);

    // compress
    SourceFlags cp_src;
    std::string cp_model, cp_fmt = "f64", cp_out = "compressed";
    int cp_k = 0;
    CLI::App* cp = app.add_subcommand("compress", "rank-k truncation of every image");
    add_source_flags(cp, cp_src, "test");
    cp->add_option("--k", cp_k, "number of singular triples to keep")->required();
    cp->add_option("--model", cp_model, "optionally report label agreement before/after");
    cp->add_option("--pixel-format", cp_fmt)->check(CLI::IsMember({"f64", "u8"}));
    cp->add_option("--out", cp_out, "output stem")->required();

    // rotate
    SourceFlags rot_src;
    std::string rot_profile, rot_out;
    std::uint64_t rot_seed = 0;
    CLI::App* rot = app.add_subcommand("rotate",
                                       "orthonormal rotations: rho and verdict invariance");
    add_source_flags(rot, rot_src, "test");
    rot->add_option("--profile", rot_profile)->required();
    rot->add_option("--seed", rot_seed);
    rot->add_option("--out", rot_out, "per-image CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (tm->parsed())
            return cmd_train_model(train_src, tm_arch, tm_hidden, tm_epochs, tm_lr, tm_decay,
                                   tm_val, tm_seed, tm_out);
        if (cal->parsed())
            return cmd_calibrate(cal_src, cal_alpha, cal_plo, cal_phi, cal_cov, cal_min, cal_label,
                                 cal_out);
        if (atk->parsed())
            return cmd_attack(atk_src, atk_model, atk_kind, atk_eps, atk_steps, atk_step, atk_mu,
                              atk_seed, atk_fmt, atk_out);
        if (ev->parsed()) return cmd_evaluate(ev_src, ev_attacked, ev_profile, ev_out);
        if (cls->parsed()) return cmd_classify(cls_src, cls_profile, cls_out);
        if (dg->parsed()) return cmd_diagnose(dg_src, dg_attacked, dg_profile, dg_index, dg_out);
        if (cp->parsed()) return cmd_compress(cp_src, cp_k, cp_model, cp_fmt, cp_out);
        if (rot->parsed()) return cmd_rotate(rot_src, rot_profile, rot_seed, rot_out);
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const std::out_of_range& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 4;
    }
    return 0;
}
