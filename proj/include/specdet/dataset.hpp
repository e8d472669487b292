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

struct LabeledDataset {
    std::vector<Image> images;
    std::vector<int> labels;
    std::string name;
    std::uint64_t checksum = 0;  // FNV-1a over the source bytes, files in order
    int num_classes = 10;
};

namespace detail {

inline std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t state = 0xcbf29ce484222325ull) {
    for (unsigned char c : bytes) {
        state ^= c;
        state *= 0x100000001b3ull;
    }
    return state;
}

inline std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open " + path);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

struct BigEndianReader {
    const unsigned char* p;
    std::size_t remaining;
    std::string context;

    std::uint32_t u32() {
        if (remaining < 4) throw DataError(context + ": truncated file");
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | p[i];
        p += 4;
        remaining -= 4;
        return v;
    }
    unsigned char u8() {
        if (remaining < 1) throw DataError(context + ": truncated file");
        --remaining;
        return *p++;
    }
    double f64() {
        if (remaining < 8) throw DataError(context + ": truncated file");
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits = (bits << 8) | p[i];
        p += 8;
        remaining -= 8;
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
};

inline void put_be_u32(std::string& out, std::uint32_t v) {
    for (int i = 3; i >= 0; --i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_be_f64(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 7; i >= 0; --i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

inline unsigned char quantize_u8(double v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

} // namespace detail

// IDX magics: 0x0803 = ubyte/3-dim images, 0x0E03 = double/3-dim images
// (type code 0x0E per the IDX spec; used to store attacked pixels exactly),
// 0x0801 = ubyte/1-dim labels.
inline constexpr std::uint32_t kIdxImagesU8 = 0x00000803u;
inline constexpr std::uint32_t kIdxImagesF64 = 0x00000E03u;
inline constexpr std::uint32_t kIdxLabels = 0x00000801u;

/// Parse the canonical MNIST IDX pair. Bytes scale by 1/255; the double
/// flavor is read verbatim and must already lie in [0,1].
inline LabeledDataset load_mnist_idx(const std::string& images_path,
                                     const std::string& labels_path) {
    const std::string img_bytes = detail::read_file(images_path);
    const std::string lbl_bytes = detail::read_file(labels_path);

    detail::BigEndianReader ir{reinterpret_cast<const unsigned char*>(img_bytes.data()),
                               img_bytes.size(), images_path};
    const std::uint32_t magic = ir.u32();
    if (magic != kIdxImagesU8 && magic != kIdxImagesF64)
        throw DataError(images_path + ": bad IDX image magic");
    const std::uint32_t count = ir.u32();
    const std::uint32_t rows = ir.u32();
    const std::uint32_t cols = ir.u32();
    if (rows == 0 || cols == 0) throw DataError(images_path + ": zero image dimensions");

    detail::BigEndianReader lr{reinterpret_cast<const unsigned char*>(lbl_bytes.data()),
                               lbl_bytes.size(), labels_path};
    if (lr.u32() != kIdxLabels) throw DataError(labels_path + ": bad IDX label magic");
    const std::uint32_t label_count = lr.u32();
    if (label_count != count)
        throw DataError("image/label count mismatch: " + std::to_string(count) + " vs " +
                        std::to_string(label_count));

    const std::size_t pixels_per_image = static_cast<std::size_t>(rows) * cols;
    const std::size_t pixel_bytes = magic == kIdxImagesU8 ? 1 : 8;
    if (ir.remaining != static_cast<std::size_t>(count) * pixels_per_image * pixel_bytes)
        throw DataError(images_path + ": payload size does not match header");
    if (lr.remaining != count) throw DataError(labels_path + ": payload size does not match header");

    LabeledDataset ds;
    ds.name = "mnist";
    ds.images.reserve(count);
    ds.labels.reserve(count);
    for (std::uint32_t n = 0; n < count; ++n) {
        Image img;
        img.rows = static_cast<int>(rows);
        img.cols = static_cast<int>(cols);
        img.channels = 1;
        img.pixels.resize(pixels_per_image);
        if (magic == kIdxImagesU8) {
            for (std::size_t i = 0; i < pixels_per_image; ++i)
                img.pixels[i] = static_cast<double>(ir.u8()) / 255.0;
        } else {
            for (std::size_t i = 0; i < pixels_per_image; ++i) {
                const double v = ir.f64();
                if (!(v >= 0.0 && v <= 1.0))
                    throw DataError(images_path + ": pixel outside [0,1] in double payload");
                img.pixels[i] = v;
            }
        }
        ds.images.push_back(std::move(img));
    }
    for (std::uint32_t n = 0; n < count; ++n) {
        const int label = lr.u8();
        if (label >= ds.num_classes)
            throw DataError(labels_path + ": label " + std::to_string(label) + " out of range");
        ds.labels.push_back(label);
    }
    ds.checksum = detail::fnv1a64(lbl_bytes, detail::fnv1a64(img_bytes));
    return ds;
}

/// Write an IDX pair; as_float keeps pixels exact (type 0x0E), otherwise the
/// canonical ubyte encoding quantizes by round(v*255).
inline void write_mnist_idx(const std::vector<Image>& images, const std::vector<int>& labels,
                            const std::string& images_path, const std::string& labels_path,
                            bool as_float = false) {
    if (images.empty() || images.size() != labels.size())
        throw DataError("write_mnist_idx: images and labels must align");
    const Image& first = images.front();
    if (first.channels != 1) throw DataError("write_mnist_idx: single-channel images only");

    std::string img_out;
    detail::put_be_u32(img_out, as_float ? kIdxImagesF64 : kIdxImagesU8);
    detail::put_be_u32(img_out, static_cast<std::uint32_t>(images.size()));
    detail::put_be_u32(img_out, static_cast<std::uint32_t>(first.rows));
    detail::put_be_u32(img_out, static_cast<std::uint32_t>(first.cols));
    for (const Image& img : images) {
        if (img.rows != first.rows || img.cols != first.cols || img.channels != 1)
            throw DataError("write_mnist_idx: heterogeneous image dimensions");
        for (double v : img.pixels) {
            if (as_float)
                detail::put_be_f64(img_out, v);
            else
                img_out.push_back(static_cast<char>(detail::quantize_u8(v)));
        }
    }
    std::string lbl_out;
    detail::put_be_u32(lbl_out, kIdxLabels);
    detail::put_be_u32(lbl_out, static_cast<std::uint32_t>(labels.size()));
    for (int label : labels) lbl_out.push_back(static_cast<char>(label));

    std::ofstream fi(images_path, std::ios::binary | std::ios::trunc);
    if (!fi) throw DataError("write_mnist_idx: cannot open " + images_path);
    fi.write(img_out.data(), static_cast<std::streamsize>(img_out.size()));
    std::ofstream fl(labels_path, std::ios::binary | std::ios::trunc);
    if (!fl) throw DataError("write_mnist_idx: cannot open " + labels_path);
    fl.write(lbl_out.data(), static_cast<std::streamsize>(lbl_out.size()));
    if (!fi || !fl) throw DataError("write_mnist_idx: write failed");
}

inline constexpr int kCifarDim = 32;
inline constexpr std::size_t kCifarPlane = 1024;  // 32*32
inline constexpr std::size_t kCifarRecordU8 = 1 + 3 * kCifarPlane;
inline constexpr std::size_t kCifarRecordF64 = 1 + 3 * kCifarPlane * 8;

/// Parse CIFAR-10 binary batches: per record one label byte then the R, G, B
/// planes. The 8-byte-pixel flavor is recognized by record size.
inline LabeledDataset load_cifar10_binary(const std::vector<std::string>& paths) {
    if (paths.empty()) throw DataError("load_cifar10_binary: no input files");
    LabeledDataset ds;
    ds.name = "cifar10";
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (const std::string& path : paths) {
        const std::string bytes = detail::read_file(path);
        hash = detail::fnv1a64(bytes, hash);
        bool as_float;
        if (!bytes.empty() && bytes.size() % kCifarRecordU8 == 0)
            as_float = false;
        else if (!bytes.empty() && bytes.size() % kCifarRecordF64 == 0)
            as_float = true;
        else
            throw DataError(path + ": length is not a whole number of CIFAR-10 records");
        detail::BigEndianReader r{reinterpret_cast<const unsigned char*>(bytes.data()),
                                  bytes.size(), path};
        const std::size_t records = bytes.size() / (as_float ? kCifarRecordF64 : kCifarRecordU8);
        for (std::size_t n = 0; n < records; ++n) {
            const int label = r.u8();
            if (label >= ds.num_classes)
                throw DataError(path + ": label " + std::to_string(label) + " out of range");
            Image img;
            img.rows = kCifarDim;
            img.cols = kCifarDim;
            img.channels = 3;
            img.pixels.resize(3 * kCifarPlane);
            for (int c = 0; c < 3; ++c) {  // R, G, B planes into channels 0, 1, 2
                for (std::size_t i = 0; i < kCifarPlane; ++i) {
                    double v;
                    if (as_float) {
                        v = r.f64();
                        if (!(v >= 0.0 && v <= 1.0))
                            throw DataError(path + ": pixel outside [0,1] in double payload");
                    } else {
                        v = static_cast<double>(r.u8()) / 255.0;
                    }
                    img.pixels[i * 3 + c] = v;
                }
            }
            ds.images.push_back(std::move(img));
            ds.labels.push_back(label);
        }
    }
    ds.checksum = hash;
    return ds;
}

inline void write_cifar10_binary(const std::vector<Image>& images, const std::vector<int>& labels,
                                 const std::string& path, bool as_float = false) {
    if (images.empty() || images.size() != labels.size())
        throw DataError("write_cifar10_binary: images and labels must align");
    std::string out;
    for (std::size_t n = 0; n < images.size(); ++n) {
        const Image& img = images[n];
        if (img.rows != kCifarDim || img.cols != kCifarDim || img.channels != 3)
            throw DataError("write_cifar10_binary: images must be 32x32x3");
        out.push_back(static_cast<char>(labels[n]));
        for (int c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < kCifarPlane; ++i) {
                const double v = img.pixels[i * 3 + c];
                if (as_float)
                    detail::put_be_f64(out, v);
                else
                    out.push_back(static_cast<char>(detail::quantize_u8(v)));
            }
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("write_cifar10_binary: cannot open " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("write_cifar10_binary: write failed");
}

/// Controlled-spectrum test image: per channel a sum of `rank` nonnegative
/// outer products, scaled (not shifted) into [0,1] so the channel rank is
/// exactly `rank`.
inline Image synthetic_low_rank(int rows, int cols, int channels, int rank, std::uint64_t seed) {
    if (rank < 1 || rank > std::min(rows, cols))
        throw std::out_of_range("synthetic_low_rank: rank outside [1, min(M,N)]");
    Rng rng(mix_seed(seed, 0x6c6f7772ull));
    Image img;
    img.rows = rows;
    img.cols = cols;
    img.channels = channels;
    img.pixels.assign(static_cast<std::size_t>(rows) * cols * channels, 0.0);
    for (int c = 0; c < channels; ++c) {
        std::vector<double> acc(static_cast<std::size_t>(rows) * cols, 0.0);
        for (int r = 0; r < rank; ++r) {
            std::vector<double> u(rows), v(cols);
            for (double& x : u) x = rng.uniform();
            for (double& x : v) x = rng.uniform();
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < cols; ++j) acc[static_cast<std::size_t>(i) * cols + j] += u[i] * v[j];
        }
        double peak = 0.0;
        for (double x : acc) peak = std::max(peak, x);
        const double scale = peak > 0.0 ? 1.0 / peak : 1.0;
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j)
                img.at(i, j, c) = acc[static_cast<std::size_t>(i) * cols + j] * scale;
    }
    return img;
}

} // namespace specdet
