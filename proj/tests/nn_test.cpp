#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "sae/nn.hpp"

using sae::AeHyperparams;
using sae::AutoencoderLayer;
using sae::Matrix;
using sae::SoftmaxHead;

TEST(Sigmoid, ClosedFormValues) {
    EXPECT_DOUBLE_EQ(sae::sigmoid(0.0), 0.5);
    EXPECT_DOUBLE_EQ(sae::sigmoid(std::log(3.0)), 0.75);
}

TEST(Sigmoid, SaturatesWithoutNan) {
    const double low = sae::sigmoid(-1000.0);
    EXPECT_GE(low, 0.0);
    EXPECT_LT(low, 1e-300);
    EXPECT_FALSE(std::isnan(low));

    const double high = sae::sigmoid(1000.0);
    EXPECT_EQ(high, 1.0);
    EXPECT_FALSE(std::isnan(high));

    EXPECT_FALSE(std::isnan(sae::sigmoid(700.0)));
    EXPECT_FALSE(std::isnan(sae::sigmoid(-700.0)));
}

TEST(Sigmoid, MonotoneAndBounded) {
    sae::Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        const double x = (rng.next_unit() - 0.5) * 2000.0;
        const double y = sae::sigmoid(x);
        EXPECT_FALSE(std::isnan(y));
        EXPECT_GE(y, 0.0);
        EXPECT_LE(y, 1.0);
        EXPECT_GE(sae::sigmoid(x + 1e-3), y);  // monotone
    }
    // Strictly inside (0,1) wherever doubles can resolve the distance.
    for (int i = 0; i < 200; ++i) {
        const double x = (rng.next_unit() - 0.5) * 60.0;
        const double y = sae::sigmoid(x);
        EXPECT_GT(y, 0.0);
        EXPECT_LT(y, 1.0);
    }
}

namespace {

AutoencoderLayer zero_layer(std::size_t n, std::size_t m) {
    return AutoencoderLayer{Matrix(m, n), std::vector<double>(m, 0.0),
                            Matrix(n, m), std::vector<double>(n, 0.0)};
}

} // namespace

TEST(Encode, ZeroLayerGivesHalfEverywhere) {
    const AutoencoderLayer layer = zero_layer(4, 3);
    sae::Rng rng(2);
    const Matrix h = sae::encode(layer, oracle::random_unit_matrix(5, 4, rng));
    ASSERT_EQ(h.rows(), 5u);
    ASSERT_EQ(h.cols(), 3u);
    for (double v : h.data()) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(Encode, SymmetricCancellation) {
    AutoencoderLayer layer = zero_layer(2, 1);
    layer.w_enc = Matrix(1, 2, {1.0, -1.0});
    const Matrix h = sae::encode(layer, Matrix(1, 2, {0.5, 0.5}));
    EXPECT_DOUBLE_EQ(h(0, 0), 0.5);
}

TEST(Encode, MatchesScalarLoopOracle) {
    sae::Rng rng(17);
    const AutoencoderLayer layer = oracle::random_layer(4, 3, rng);
    const Matrix x = oracle::random_unit_matrix(2, 4, rng);
    const Matrix h = sae::encode(layer, x);
    const Matrix expected = oracle::naive_encode(layer, x);
    for (std::size_t i = 0; i < h.size(); ++i)
        EXPECT_NEAR(h.data()[i], expected.data()[i], 1e-12);
}

TEST(Encode, ShapeMismatchThrows) {
    const AutoencoderLayer layer = zero_layer(4, 3);
    EXPECT_THROW(sae::encode(layer, Matrix(2, 5)), sae::ShapeError);
}

TEST(Decode, ClosedFormAndShapes) {
    AutoencoderLayer layer = zero_layer(1, 1);
    layer.w_dec = Matrix(1, 1, {std::log(3.0)});
    const Matrix y = sae::decode(layer, Matrix(1, 1, {1.0}));
    EXPECT_DOUBLE_EQ(y(0, 0), 0.75);

    const AutoencoderLayer zl = zero_layer(4, 3);
    sae::Rng rng(2);
    const Matrix x = oracle::random_unit_matrix(6, 4, rng);
    const Matrix round_trip = sae::decode(zl, sae::encode(zl, x));
    EXPECT_EQ(round_trip.rows(), 6u);
    EXPECT_EQ(round_trip.cols(), 4u);
    for (double v : round_trip.data()) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(Decode, MatchesScalarLoopOracle) {
    sae::Rng rng(23);
    const AutoencoderLayer layer = oracle::random_layer(5, 3, rng);
    const Matrix h = oracle::random_unit_matrix(4, 3, rng);
    const Matrix y = sae::decode(layer, h);
    const Matrix expected = oracle::naive_decode(layer, h);
    for (std::size_t i = 0; i < y.size(); ++i)
        EXPECT_NEAR(y.data()[i], expected.data()[i], 1e-12);
}

TEST(Softmax, ZeroHeadIsUniform) {
    const SoftmaxHead head = sae::make_zero_head(6);
    sae::Rng rng(9);
    const Matrix p = sae::softmax_forward(head, oracle::random_matrix(3, 6, rng));
    for (double v : p.data()) EXPECT_NEAR(v, 0.1, 1e-15);
}

TEST(Softmax, TwoLogitClosedForm) {
    const Matrix logits(1, 2, {std::log(2.0), 0.0});
    const Matrix p = sae::softmax_rows(logits);
    EXPECT_NEAR(p(0, 0), 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(p(0, 1), 1.0 / 3.0, 1e-15);
}

TEST(Softmax, ShiftInvariance) {
    sae::Rng rng(31);
    const Matrix logits = oracle::random_matrix(4, 10, rng, 3.0);
    Matrix shifted = logits;
    for (std::size_t i = 0; i < shifted.rows(); ++i)
        for (std::size_t j = 0; j < shifted.cols(); ++j) shifted(i, j) += 1000.0;
    const Matrix p = sae::softmax_rows(logits);
    const Matrix q = sae::softmax_rows(shifted);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p.data()[i], q.data()[i], 1e-12);
}

TEST(Softmax, RowsSumToOne) {
    sae::Rng rng(37);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix p = sae::softmax_rows(oracle::random_matrix(3, 10, rng, 50.0));
        for (std::size_t i = 0; i < p.rows(); ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < p.cols(); ++j) sum += p(i, j);
            EXPECT_NEAR(sum, 1.0, 1e-12);
        }
    }
}

TEST(AeLoss, PerfectReconstructionIsZero) {
    // Zero layer reconstructs the constant 0.5 image exactly.
    const AutoencoderLayer layer = zero_layer(6, 3);
    Matrix x(4, 6);
    for (double &v : x.data()) v = 0.5;
    const AeHyperparams hp{0.0, 0.05, 0.0};
    EXPECT_DOUBLE_EQ(sae::ae_loss(layer, x, hp), 0.0);
}

TEST(AeLoss, KlVanishesWhenMeanActivationHitsTarget) {
    // Zero layer: every hidden activation is exactly 0.5, so rho_hat == rho
    // for target 0.5 and the KL term contributes exactly nothing.
    const AutoencoderLayer layer = zero_layer(6, 3);
    sae::Rng rng(4);
    const Matrix x = oracle::random_unit_matrix(5, 6, rng);
    const AeHyperparams without{0.0, 0.5, 0.0};
    const AeHyperparams with{0.0, 0.5, 7.0};
    EXPECT_DOUBLE_EQ(sae::ae_loss(layer, x, with), sae::ae_loss(layer, x, without));
}

TEST(AeLoss, MatchesScalarLoopOracle) {
    sae::Rng rng(41);
    for (int trial = 0; trial < 10; ++trial) {
        const AutoencoderLayer layer = oracle::random_layer(5, 3, rng);
        const Matrix x = oracle::random_unit_matrix(4, 5, rng);
        const AeHyperparams hp{0.01, 0.05, 0.7};
        EXPECT_NEAR(sae::ae_loss(layer, x, hp), oracle::naive_ae_loss(layer, x, hp), 1e-12);
    }
}

TEST(AeLoss, NonNegativeForValidWeights) {
    sae::Rng rng(43);
    for (int trial = 0; trial < 20; ++trial) {
        const AutoencoderLayer layer = oracle::random_layer(4, 2, rng);
        const Matrix x = oracle::random_unit_matrix(3, 4, rng);
        const AeHyperparams hp{rng.next_unit() * 0.01, 0.05 + rng.next_unit() * 0.5,
                               rng.next_unit() * 2.0};
        EXPECT_GE(sae::ae_loss(layer, x, hp), 0.0);
    }
}

TEST(AeLoss, SaturatedActivationsStayFinite) {
    AutoencoderLayer layer = zero_layer(3, 2);
    layer.b_enc.assign(2, 500.0);  // rho_hat saturates at 1 before clamping
    sae::Rng rng(6);
    const Matrix x = oracle::random_unit_matrix(3, 3, rng);
    const AeHyperparams hp{0.001, 0.05, 1.0};
    EXPECT_TRUE(std::isfinite(sae::ae_loss(layer, x, hp)));
    const sae::AeGradients g = sae::ae_gradients(layer, x, hp);
    EXPECT_TRUE(std::isfinite(g.loss));
    for (double v : g.grad_w_enc.data()) EXPECT_TRUE(std::isfinite(v));
    for (double v : g.grad_b_enc) EXPECT_TRUE(std::isfinite(v));
}

namespace {

// Central-difference check of every ae_gradients component on one instance.
void expect_ae_gradients_match_fd(AutoencoderLayer layer, const Matrix &x,
                                  const AeHyperparams &hp) {
    const sae::AeGradients g = sae::ae_gradients(layer, x, hp);
    const auto loss = [&] { return sae::ae_loss(layer, x, hp); };

    const auto fd_w_enc =
        oracle::central_diff(layer.w_enc.data().data(), layer.w_enc.size(), loss);
    EXPECT_TRUE(oracle::grads_agree(g.grad_w_enc.data().data(), fd_w_enc)) << "w_enc";

    const auto fd_b_enc = oracle::central_diff(layer.b_enc.data(), layer.b_enc.size(), loss);
    EXPECT_TRUE(oracle::grads_agree(g.grad_b_enc.data(), fd_b_enc)) << "b_enc";

    const auto fd_w_dec =
        oracle::central_diff(layer.w_dec.data().data(), layer.w_dec.size(), loss);
    EXPECT_TRUE(oracle::grads_agree(g.grad_w_dec.data().data(), fd_w_dec)) << "w_dec";

    const auto fd_b_dec = oracle::central_diff(layer.b_dec.data(), layer.b_dec.size(), loss);
    EXPECT_TRUE(oracle::grads_agree(g.grad_b_dec.data(), fd_b_dec)) << "b_dec";
}

} // namespace

TEST(AeGradients, MatchFiniteDifferencesOnFixedInstance) {
    sae::Rng rng(47);
    const AutoencoderLayer layer = oracle::random_layer(5, 3, rng);
    const Matrix x = oracle::random_unit_matrix(4, 5, rng);
    expect_ae_gradients_match_fd(layer, x, AeHyperparams{0.002, 0.05, 1.5});
}

TEST(AeGradients, MatchFiniteDifferencesAcrossRandomInstances) {
    sae::Rng rng(53);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + rng.next_below(4);
        const std::size_t m = 1 + rng.next_below(4);
        const std::size_t batch = 1 + rng.next_below(5);
        const AutoencoderLayer layer = oracle::random_layer(n, m, rng);
        const Matrix x = oracle::random_unit_matrix(batch, n, rng);
        const AeHyperparams hp{rng.next_unit() * 0.01, 0.02 + rng.next_unit() * 0.4,
                               rng.next_unit() * 3.0};
        expect_ae_gradients_match_fd(layer, x, hp);
    }
}

TEST(AeGradients, ReconstructionTermVanishesAtStationaryPoint) {
    const AutoencoderLayer layer = zero_layer(6, 3);
    Matrix x(4, 6);
    for (double &v : x.data()) v = 0.5;
    const sae::AeGradients g = sae::ae_gradients(layer, x, AeHyperparams{0.0, 0.05, 0.0});
    for (double v : g.grad_w_enc.data()) EXPECT_LT(std::abs(v), 1e-9);
    for (double v : g.grad_b_enc) EXPECT_LT(std::abs(v), 1e-9);
    for (double v : g.grad_w_dec.data()) EXPECT_LT(std::abs(v), 1e-9);
    for (double v : g.grad_b_dec) EXPECT_LT(std::abs(v), 1e-9);
}

TEST(AeGradients, L2TermAloneIsExactlyTwoLambdaW) {
    // Zero decoder weights cut the data path to w_enc, so with beta = 0 the
    // encoder gradient is purely the L2 term.
    sae::Rng rng(59);
    AutoencoderLayer layer = oracle::random_layer(4, 3, rng);
    layer.w_dec = Matrix(4, 3);
    const Matrix x = oracle::random_unit_matrix(5, 4, rng);
    const double lambda = 0.37;
    const sae::AeGradients g = sae::ae_gradients(layer, x, AeHyperparams{lambda, 0.05, 0.0});
    for (std::size_t i = 0; i < layer.w_enc.size(); ++i)
        EXPECT_DOUBLE_EQ(g.grad_w_enc.data()[i], 2.0 * lambda * layer.w_enc.data()[i]);
}

TEST(SoftmaxGradients, LossAtUniformIsLnTen) {
    const SoftmaxHead head = sae::make_zero_head(4);
    sae::Rng rng(61);
    const Matrix f = oracle::random_matrix(6, 4, rng);
    const auto labels = oracle::random_labels(6, rng);
    EXPECT_DOUBLE_EQ(sae::softmax_loss(head, f, labels), std::log(10.0));
}

TEST(SoftmaxGradients, UniformPredictionLogitGradient) {
    const SoftmaxHead head = sae::make_zero_head(4);
    sae::Rng rng(67);
    const std::size_t batch = 5;
    const Matrix f = oracle::random_matrix(batch, 4, rng);
    const auto labels = oracle::random_labels(batch, rng);
    const sae::SoftmaxGradients g = sae::softmax_gradients(head, f, labels);
    for (std::size_t i = 0; i < batch; ++i)
        for (int j = 0; j < sae::kNumClasses; ++j) {
            const double expected = (0.1 - (j == labels[i] ? 1.0 : 0.0)) / double(batch);
            EXPECT_NEAR(g.grad_logits(i, j), expected, 1e-15);
        }
}

TEST(SoftmaxGradients, MatchFiniteDifferences) {
    sae::Rng rng(71);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t features = 2 + rng.next_below(4);
        const std::size_t batch = 1 + rng.next_below(6);
        SoftmaxHead head = oracle::random_head(features, rng);
        Matrix f = oracle::random_matrix(batch, features, rng);
        const auto labels = oracle::random_labels(batch, rng);
        const sae::SoftmaxGradients g = sae::softmax_gradients(head, f, labels);
        EXPECT_NEAR(g.loss, sae::softmax_loss(head, f, labels), 1e-12);

        const auto loss = [&] { return sae::softmax_loss(head, f, labels); };
        const auto fd_w = oracle::central_diff(head.w.data().data(), head.w.size(), loss);
        EXPECT_TRUE(oracle::grads_agree(g.grad_w.data().data(), fd_w)) << "head.w";
        const auto fd_b = oracle::central_diff(head.b.data(), head.b.size(), loss);
        EXPECT_TRUE(oracle::grads_agree(g.grad_b.data(), fd_b)) << "head.b";
        const auto fd_f = oracle::central_diff(f.data().data(), f.size(), loss);
        EXPECT_TRUE(oracle::grads_agree(g.grad_features.data().data(), fd_f)) << "features";
    }
}

TEST(SoftmaxGradients, RejectsBadLabels) {
    const SoftmaxHead head = sae::make_zero_head(4);
    const Matrix f(2, 4);
    EXPECT_THROW(sae::softmax_gradients(head, f, {0}), sae::ShapeError);
    EXPECT_THROW(sae::softmax_gradients(head, f, {0, 10}), sae::ConfigError);
    EXPECT_THROW(sae::softmax_gradients(head, f, {0, -1}), sae::ConfigError);
}

TEST(Hyperparams, ValidationRejectsBadRanges) {
    EXPECT_THROW((AeHyperparams{-0.1, 0.05, 1.0}).validate(), sae::ConfigError);
    EXPECT_THROW((AeHyperparams{0.0, 0.0, 1.0}).validate(), sae::ConfigError);
    EXPECT_THROW((AeHyperparams{0.0, 1.0, 1.0}).validate(), sae::ConfigError);
    EXPECT_THROW((AeHyperparams{0.0, 0.05, -1.0}).validate(), sae::ConfigError);
    EXPECT_NO_THROW((AeHyperparams{0.0, 0.05, 0.0}).validate());
}
