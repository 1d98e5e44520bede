#pragma once

/// @file idx.hpp IDX-format (MNIST container) loading, fixture writing, and
/// class-balanced subsetting. Big-endian, bit-exact round trips.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "sae/common.hpp"
#include "sae/matrix.hpp"
#include "sae/nn.hpp"

namespace sae {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
inline constexpr std::size_t kImageSide = 28;
inline constexpr std::size_t kImagePixels = kImageSide * kImageSide;

/// IDX parse failure; kind() tells the error cases apart.
class IdxError : public std::runtime_error {
public:
    enum class Kind { BadMagic, Truncated, CountMismatch, BadDimensions, BadLabel };

    IdxError(Kind kind, const std::string &msg) : std::runtime_error(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/// Images as rows in [0,1] plus digit labels; immutable after construction.
struct Dataset {
    Matrix images;            // N x 784
    std::vector<int> labels;  // N entries in 0..9
    std::string image_path;
    std::string label_path;

    std::size_t size() const { return images.rows(); }
};

namespace detail {

inline std::vector<unsigned char> read_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                      std::istreambuf_iterator<char>());
}

struct IdxCursor {
    const std::vector<unsigned char> &bytes;
    const std::string &path;
    std::size_t pos = 0;

    std::uint32_t read_u32_be() {
        if (pos + 4 > bytes.size())
            throw IdxError(IdxError::Kind::Truncated, path + ": truncated header");
        std::uint32_t v = (std::uint32_t(bytes[pos]) << 24) | (std::uint32_t(bytes[pos + 1]) << 16) |
                          (std::uint32_t(bytes[pos + 2]) << 8) | std::uint32_t(bytes[pos + 3]);
        pos += 4;
        return v;
    }

    const unsigned char *payload(std::size_t n) {
        if (pos + n > bytes.size())
            throw IdxError(IdxError::Kind::Truncated,
                           path + ": payload is " + std::to_string(bytes.size() - pos) +
                               " bytes, expected " + std::to_string(n));
        return bytes.data() + pos;
    }
};

inline void write_u32_be(std::ofstream &out, std::uint32_t v) {
    const char b[4] = {char(v >> 24), char(v >> 16), char(v >> 8), char(v)};
    out.write(b, 4);
}

} // namespace detail

/// Loads an IDX image file as an N x 784 matrix of pixels in [0,1]. Pixels
/// are mapped byte/255 and nothing else, so 0 -> 0.0 and 255 -> 1.0 exactly.
/// Images must be 28x28; files are rejected rather than resized.
inline Matrix load_idx_images(const std::string &image_path) {
    const std::vector<unsigned char> bytes = detail::read_file(image_path);
    detail::IdxCursor c{bytes, image_path};
    if (const std::uint32_t magic = c.read_u32_be(); magic != kIdxImageMagic)
        throw IdxError(IdxError::Kind::BadMagic,
                       image_path + ": bad image magic 0x" + std::to_string(magic));
    const std::uint32_t n_images = c.read_u32_be();
    const std::uint32_t rows = c.read_u32_be();
    const std::uint32_t cols = c.read_u32_be();
    if (rows != kImageSide || cols != kImageSide)
        throw IdxError(IdxError::Kind::BadDimensions,
                       image_path + ": images are " + std::to_string(rows) + "x" +
                           std::to_string(cols) + ", expected 28x28 (files are never resized)");
    const unsigned char *pixels = c.payload(std::size_t(n_images) * kImagePixels);
    Matrix images(n_images, kImagePixels);
    for (std::size_t i = 0; i < images.size(); ++i)
        images.data()[i] = static_cast<double>(pixels[i]) / 255.0;
    return images;
}

/// Loads an IDX label file; every entry must be a digit 0..9.
inline std::vector<int> load_idx_labels(const std::string &label_path) {
    const std::vector<unsigned char> bytes = detail::read_file(label_path);
    detail::IdxCursor c{bytes, label_path};
    if (const std::uint32_t magic = c.read_u32_be(); magic != kIdxLabelMagic)
        throw IdxError(IdxError::Kind::BadMagic,
                       label_path + ": bad label magic 0x" + std::to_string(magic));
    const std::uint32_t n_labels = c.read_u32_be();
    const unsigned char *label_bytes = c.payload(n_labels);
    std::vector<int> labels(n_labels);
    for (std::size_t i = 0; i < n_labels; ++i) {
        if (label_bytes[i] > 9)
            throw IdxError(IdxError::Kind::BadLabel,
                           label_path + ": label " + std::to_string(int(label_bytes[i])) +
                               " at index " + std::to_string(i) + " is not a digit");
        labels[i] = static_cast<int>(label_bytes[i]);
    }
    return labels;
}

/// Loads an IDX image/label pair into a normalized Dataset; counts in the
/// two files must agree.
inline Dataset load_idx_pair(const std::string &image_path, const std::string &label_path) {
    Dataset d;
    d.images = load_idx_images(image_path);
    d.labels = load_idx_labels(label_path);
    if (d.labels.size() != d.images.rows())
        throw IdxError(IdxError::Kind::CountMismatch,
                       std::to_string(d.images.rows()) + " images vs " +
                           std::to_string(d.labels.size()) + " labels");
    d.image_path = image_path;
    d.label_path = label_path;
    return d;
}

/// Writes images back to IDX; pixels are re-quantized with round(v*255),
/// which inverts the loader's normalization exactly.
inline void write_idx_images(const std::string &path, const Matrix &images) {
    if (images.cols() != kImagePixels)
        throw ShapeError("write_idx_images: " + shape_str(images) + ", expected Nx784");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    detail::write_u32_be(out, kIdxImageMagic);
    detail::write_u32_be(out, static_cast<std::uint32_t>(images.rows()));
    detail::write_u32_be(out, kImageSide);
    detail::write_u32_be(out, kImageSide);
    std::vector<char> bytes(images.size());
    for (std::size_t i = 0; i < images.size(); ++i)
        bytes[i] = static_cast<char>(static_cast<unsigned char>(std::lround(images.data()[i] * 255.0)));
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path);
}

inline void write_idx_labels(const std::string &path, const std::vector<int> &labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    detail::write_u32_be(out, kIdxLabelMagic);
    detail::write_u32_be(out, static_cast<std::uint32_t>(labels.size()));
    for (int y : labels) {
        if (y < 0 || y > 9) throw ConfigError("label out of range 0..9: " + std::to_string(y));
        const char b = static_cast<char>(y);
        out.write(&b, 1);
    }
    if (!out) throw IoError("short write to " + path);
}

/// Seeded, class-balanced subset: per_class samples of every digit, indices
/// re-sorted ascending so the full-class case is the original order.
inline Dataset take_subset(const Dataset &d, std::size_t per_class, std::uint64_t seed) {
    std::vector<std::vector<std::size_t>> by_class(kNumClasses);
    for (std::size_t i = 0; i < d.labels.size(); ++i)
        by_class[d.labels[i]].push_back(i);

    Rng rng(seed);
    std::vector<std::size_t> chosen;
    chosen.reserve(per_class * kNumClasses);
    for (int c = 0; c < kNumClasses; ++c) {
        auto &idx = by_class[c];
        if (idx.size() < per_class)
            throw ConfigError("take_subset: class " + std::to_string(c) + " has only " +
                              std::to_string(idx.size()) + " samples, need " +
                              std::to_string(per_class));
        detail::shuffle_indices(idx, rng);
        chosen.insert(chosen.end(), idx.begin(), idx.begin() + per_class);
    }
    std::sort(chosen.begin(), chosen.end());

    Dataset out;
    out.image_path = d.image_path;
    out.label_path = d.label_path;
    out.images = Matrix(chosen.size(), d.images.cols());
    out.labels.resize(chosen.size());
    for (std::size_t r = 0; r < chosen.size(); ++r) {
        const double *s = d.images.row(chosen[r]);
        double *dst = out.images.row(r);
        for (std::size_t c = 0; c < d.images.cols(); ++c) dst[c] = s[c];
        out.labels[r] = d.labels[chosen[r]];
    }
    return out;
}

} // namespace sae
