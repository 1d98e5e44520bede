#pragma once

/// @file checkpoint.hpp Binary checkpoint container.
///
/// Layout: magic "SAED", version u32, tensor count u32, then per tensor
/// rows u32, cols u32 and the row-major payload as little-endian 64-bit
/// floats. All integers little-endian. Round trips are bit-exact.
///
/// A stacked model is 6 tensors in declaration order (enc1.w, enc1.b,
/// enc2.w, enc2.b, head.w, head.b); a pretrained autoencoder is 4 (w_enc,
/// b_enc, w_dec, b_dec). Vectors are stored as 1 x len tensors.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "sae/common.hpp"
#include "sae/matrix.hpp"
#include "sae/nn.hpp"
#include "sae/stack.hpp"

namespace sae {

inline constexpr char kCheckpointMagic[4] = {'S', 'A', 'E', 'D'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
public:
    enum class Kind { BadMagic, BadVersion, Truncated, BadContents };

    CheckpointError(Kind kind, const std::string &msg) : std::runtime_error(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

namespace detail {

inline void put_u32_le(std::string &out, std::uint32_t v) {
    out.push_back(char(v));
    out.push_back(char(v >> 8));
    out.push_back(char(v >> 16));
    out.push_back(char(v >> 24));
}

inline void put_f64_le(std::string &out, double v) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(char(bits >> (8 * i)));
}

struct CheckpointCursor {
    const std::vector<unsigned char> &bytes;
    const std::string &path;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > bytes.size())
            throw CheckpointError(CheckpointError::Kind::Truncated, path + ": truncated checkpoint");
    }

    std::uint32_t read_u32_le() {
        need(4);
        std::uint32_t v = std::uint32_t(bytes[pos]) | (std::uint32_t(bytes[pos + 1]) << 8) |
                          (std::uint32_t(bytes[pos + 2]) << 16) |
                          (std::uint32_t(bytes[pos + 3]) << 24);
        pos += 4;
        return v;
    }

    double read_f64_le() {
        need(8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= std::uint64_t(bytes[pos + i]) << (8 * i);
        pos += 8;
        return std::bit_cast<double>(bits);
    }
};

inline std::vector<unsigned char> read_checkpoint_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                      std::istreambuf_iterator<char>());
}

} // namespace detail

inline void write_checkpoint(const std::string &path, const std::vector<Matrix> &tensors) {
    std::string buf;
    buf.append(kCheckpointMagic, 4);
    detail::put_u32_le(buf, kCheckpointVersion);
    detail::put_u32_le(buf, static_cast<std::uint32_t>(tensors.size()));
    for (const Matrix &t : tensors) {
        detail::put_u32_le(buf, static_cast<std::uint32_t>(t.rows()));
        detail::put_u32_le(buf, static_cast<std::uint32_t>(t.cols()));
        for (double v : t.data()) detail::put_f64_le(buf, v);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("short write to " + path);
}

inline std::vector<Matrix> read_checkpoint(const std::string &path) {
    const std::vector<unsigned char> bytes = detail::read_checkpoint_file(path);
    detail::CheckpointCursor c{bytes, path};
    c.need(4);
    if (!std::equal(kCheckpointMagic, kCheckpointMagic + 4, bytes.begin()))
        throw CheckpointError(CheckpointError::Kind::BadMagic, path + ": not a SAED checkpoint");
    c.pos = 4;
    if (const std::uint32_t version = c.read_u32_le(); version != kCheckpointVersion)
        throw CheckpointError(CheckpointError::Kind::BadVersion,
                              path + ": unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t count = c.read_u32_le();
    std::vector<Matrix> tensors;
    tensors.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t rows = c.read_u32_le();
        const std::uint32_t cols = c.read_u32_le();
        Matrix t(rows, cols);
        for (double &v : t.data()) v = c.read_f64_le();
        tensors.push_back(std::move(t));
    }
    if (c.pos != bytes.size())
        throw CheckpointError(CheckpointError::Kind::BadContents,
                              path + ": trailing bytes after last tensor");
    return tensors;
}

namespace detail {

inline Matrix vector_tensor(const std::vector<double> &v) {
    Matrix m(1, v.size());
    m.data() = v;
    return m;
}

inline std::vector<double> tensor_vector(const Matrix &m, const std::string &path,
                                         const char *name) {
    if (m.rows() != 1)
        throw CheckpointError(CheckpointError::Kind::BadContents,
                              path + ": tensor " + name + " is " + shape_str(m) +
                                  ", expected a 1-row vector");
    return m.data();
}

} // namespace detail

inline void save_model(const std::string &path, const StackedModel &model) {
    model.validate();
    write_checkpoint(path, {model.enc1.w, detail::vector_tensor(model.enc1.b),
                            model.enc2.w, detail::vector_tensor(model.enc2.b),
                            model.head.w, detail::vector_tensor(model.head.b)});
}

inline StackedModel load_model(const std::string &path) {
    std::vector<Matrix> t = read_checkpoint(path);
    if (t.size() != 6)
        throw CheckpointError(CheckpointError::Kind::BadContents,
                              path + ": expected 6 tensors for a stacked model, found " +
                                  std::to_string(t.size()));
    StackedModel m;
    m.enc1 = Encoder{std::move(t[0]), detail::tensor_vector(t[1], path, "enc1.b")};
    m.enc2 = Encoder{std::move(t[2]), detail::tensor_vector(t[3], path, "enc2.b")};
    m.head = SoftmaxHead{std::move(t[4]), detail::tensor_vector(t[5], path, "head.b")};
    try {
        m.validate();
    } catch (const ShapeError &e) {
        throw CheckpointError(CheckpointError::Kind::BadContents,
                              path + ": inconsistent model shapes (" + e.what() + ")");
    }
    return m;
}

inline void save_layer(const std::string &path, const AutoencoderLayer &layer) {
    layer.validate();
    write_checkpoint(path, {layer.w_enc, detail::vector_tensor(layer.b_enc),
                            layer.w_dec, detail::vector_tensor(layer.b_dec)});
}

inline AutoencoderLayer load_layer(const std::string &path) {
    std::vector<Matrix> t = read_checkpoint(path);
    if (t.size() != 4)
        throw CheckpointError(CheckpointError::Kind::BadContents,
                              path + ": expected 4 tensors for an autoencoder, found " +
                                  std::to_string(t.size()));
    AutoencoderLayer layer{std::move(t[0]), detail::tensor_vector(t[1], path, "b_enc"),
                           std::move(t[2]), detail::tensor_vector(t[3], path, "b_dec")};
    try {
        layer.validate();
    } catch (const ShapeError &e) {
        throw CheckpointError(CheckpointError::Kind::BadContents,
                              path + ": inconsistent layer shapes (" + e.what() + ")");
    }
    return layer;
}

} // namespace sae
