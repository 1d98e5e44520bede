#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "sae/checkpoint.hpp"

using sae::CheckpointError;
using sae::Matrix;

namespace {

std::filesystem::path temp_path(const char *name) {
    return std::filesystem::temp_directory_path() / name;
}

std::vector<char> slurp(const std::filesystem::path &p) {
    std::ifstream in(p, std::ios::binary);
    return std::vector<char>(std::istreambuf_iterator<char>(in),
                             std::istreambuf_iterator<char>());
}

} // namespace

TEST(Checkpoint, TensorListRoundTripsBitExactly) {
    sae::Rng rng(1);
    const std::vector<Matrix> tensors{oracle::random_matrix(3, 5, rng),
                                      oracle::random_matrix(1, 7, rng),
                                      oracle::random_matrix(4, 1, rng)};
    const auto path = temp_path("sae_ckpt_roundtrip.sae");
    sae::write_checkpoint(path.string(), tensors);
    const std::vector<Matrix> back = sae::read_checkpoint(path.string());
    ASSERT_EQ(back.size(), tensors.size());
    for (std::size_t i = 0; i < tensors.size(); ++i) EXPECT_TRUE(back[i] == tensors[i]);
    std::filesystem::remove(path);
}

TEST(Checkpoint, ModelRoundTripsBitExactly) {
    sae::Rng rng(2);
    const sae::StackedModel model = oracle::random_stack(12, 6, 4, rng);
    const auto path = temp_path("sae_ckpt_model.sae");
    sae::save_model(path.string(), model);
    const sae::StackedModel back = sae::load_model(path.string());
    EXPECT_TRUE(back.enc1.w == model.enc1.w);
    EXPECT_EQ(back.enc1.b, model.enc1.b);
    EXPECT_TRUE(back.enc2.w == model.enc2.w);
    EXPECT_EQ(back.enc2.b, model.enc2.b);
    EXPECT_TRUE(back.head.w == model.head.w);
    EXPECT_EQ(back.head.b, model.head.b);

    // Re-saving the loaded model reproduces the file byte for byte.
    const auto path2 = temp_path("sae_ckpt_model2.sae");
    sae::save_model(path2.string(), back);
    EXPECT_EQ(slurp(path), slurp(path2));
    std::filesystem::remove(path);
    std::filesystem::remove(path2);
}

TEST(Checkpoint, LayerRoundTripsBitExactly) {
    sae::Rng rng(3);
    const sae::AutoencoderLayer layer = oracle::random_layer(9, 4, rng);
    const auto path = temp_path("sae_ckpt_layer.sae");
    sae::save_layer(path.string(), layer);
    const sae::AutoencoderLayer back = sae::load_layer(path.string());
    EXPECT_TRUE(back.w_enc == layer.w_enc);
    EXPECT_EQ(back.b_enc, layer.b_enc);
    EXPECT_TRUE(back.w_dec == layer.w_dec);
    EXPECT_EQ(back.b_dec, layer.b_dec);
    std::filesystem::remove(path);
}

TEST(Checkpoint, FileStartsWithMagicAndVersion) {
    sae::Rng rng(4);
    const auto path = temp_path("sae_ckpt_header.sae");
    sae::write_checkpoint(path.string(), {oracle::random_matrix(2, 2, rng)});
    const std::vector<char> bytes = slurp(path);
    ASSERT_GE(bytes.size(), 12u);
    EXPECT_EQ(bytes[0], 'S');
    EXPECT_EQ(bytes[1], 'A');
    EXPECT_EQ(bytes[2], 'E');
    EXPECT_EQ(bytes[3], 'D');
    EXPECT_EQ(bytes[4], 1);  // version 1, little-endian
    EXPECT_EQ(bytes[5], 0);
    // tensor count u32 LE
    EXPECT_EQ(bytes[8], 1);
    // first tensor dims: rows=2, cols=2
    EXPECT_EQ(bytes[12], 2);
    EXPECT_EQ(bytes[16], 2);
    EXPECT_EQ(bytes.size(), 12u + 8u + 4u * 8u);
    std::filesystem::remove(path);
}

TEST(CheckpointErrors, DistinguishTheFailureModes) {
    const auto path = temp_path("sae_ckpt_bad.sae");

    {  // bad magic
        std::ofstream out(path, std::ios::binary);
        out.write("NOPE\x01\x00\x00\x00\x00\x00\x00\x00", 12);
    }
    try {
        sae::read_checkpoint(path.string());
        FAIL() << "expected BadMagic";
    } catch (const CheckpointError &e) {
        EXPECT_EQ(e.kind(), CheckpointError::Kind::BadMagic);
    }

    {  // unsupported version
        std::ofstream out(path, std::ios::binary);
        out.write("SAED\x09\x00\x00\x00\x00\x00\x00\x00", 12);
    }
    try {
        sae::read_checkpoint(path.string());
        FAIL() << "expected BadVersion";
    } catch (const CheckpointError &e) {
        EXPECT_EQ(e.kind(), CheckpointError::Kind::BadVersion);
    }

    {  // truncated payload: one 2x2 tensor announced, no doubles present
        std::ofstream out(path, std::ios::binary);
        out.write("SAED\x01\x00\x00\x00\x01\x00\x00\x00", 12);
        out.write("\x02\x00\x00\x00\x02\x00\x00\x00", 8);
    }
    try {
        sae::read_checkpoint(path.string());
        FAIL() << "expected Truncated";
    } catch (const CheckpointError &e) {
        EXPECT_EQ(e.kind(), CheckpointError::Kind::Truncated);
    }

    {  // trailing garbage after the declared tensors
        sae::write_checkpoint(path.string(), {Matrix(1, 1, {0.5})});
        std::ofstream out(path, std::ios::binary | std::ios::app);
        out.write("x", 1);
    }
    try {
        sae::read_checkpoint(path.string());
        FAIL() << "expected BadContents";
    } catch (const CheckpointError &e) {
        EXPECT_EQ(e.kind(), CheckpointError::Kind::BadContents);
    }

    // load_model on a 4-tensor (layer) file
    sae::Rng rng(5);
    sae::save_layer(path.string(), oracle::random_layer(6, 3, rng));
    try {
        sae::load_model(path.string());
        FAIL() << "expected BadContents";
    } catch (const CheckpointError &e) {
        EXPECT_EQ(e.kind(), CheckpointError::Kind::BadContents);
    }

    std::filesystem::remove(path);
    EXPECT_THROW(sae::read_checkpoint(path.string()), sae::IoError);
}
