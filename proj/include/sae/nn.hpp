#pragma once

/// @file nn.hpp Neural primitives: sigmoid encoder/decoder passes, softmax
/// head, the sparse-autoencoder loss, and their analytic gradients.
///
/// Shape conventions: a batch is one sample per row. Weight matrices store
/// one row per output unit, so every forward pass is batch * W^T and both
/// operands stream along contiguous rows.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "sae/common.hpp"
#include "sae/matrix.hpp"

namespace sae {

inline constexpr int kNumClasses = 10;

/// Logistic function, saturating instead of overflowing: exp() is only ever
/// taken of a non-positive argument.
inline double sigmoid(double v) {
    if (v >= 0.0) {
        return 1.0 / (1.0 + std::exp(-v));
    }
    const double e = std::exp(v);
    return e / (1.0 + e);
}

/** One sparse autoencoder: untied encoder and decoder weights.
 *
 * w_enc is hidden x input (one row per hidden unit), w_dec is input x hidden
 * (one row per reconstructed unit). The decoder is not constrained to the
 * encoder transpose.
 */
struct AutoencoderLayer {
    Matrix w_enc;               // m x n
    std::vector<double> b_enc;  // m
    Matrix w_dec;               // n x m
    std::vector<double> b_dec;  // n

    std::size_t input_size() const { return w_enc.cols(); }
    std::size_t hidden_size() const { return w_enc.rows(); }

    void validate() const {
        const std::size_t m = w_enc.rows(), n = w_enc.cols();
        if (m < 1 || n < 1)
            throw ShapeError("AutoencoderLayer: sizes must be >= 1, got w_enc " +
                             shape_str(w_enc));
        if (w_dec.rows() != n || w_dec.cols() != m)
            throw ShapeError("AutoencoderLayer: w_dec is " + shape_str(w_dec) +
                             ", expected " + std::to_string(n) + "x" + std::to_string(m));
        if (b_enc.size() != m || b_dec.size() != n)
            throw ShapeError("AutoencoderLayer: bias lengths " +
                             std::to_string(b_enc.size()) + "/" + std::to_string(b_dec.size()) +
                             " do not match sizes " + std::to_string(m) + "/" + std::to_string(n));
    }
};

/// Linear map to the 10 digit classes plus softmax normalization.
struct SoftmaxHead {
    Matrix w;               // 10 x f
    std::vector<double> b;  // 10

    std::size_t feature_size() const { return w.cols(); }

    void validate() const {
        if (w.rows() != kNumClasses || b.size() != kNumClasses)
            throw ShapeError("SoftmaxHead: expected exactly 10 classes, got w " +
                             shape_str(w) + ", b length " + std::to_string(b.size()));
    }
};

inline SoftmaxHead make_zero_head(std::size_t feature_size) {
    return SoftmaxHead{Matrix(kNumClasses, feature_size),
                       std::vector<double>(kNumClasses, 0.0)};
}

/** Sparse-autoencoder loss weights.
 *
 * Setting a weight to zero disables its term, so l2_weight alone reproduces a
 * plain L2-regularized autoencoder. L2 applies to weights only, never biases.
 *
 * The defaults are calibrated against the reconstruction term, which averages
 * over batch and pixels: much heavier penalties let the KL term win outright
 * and every hidden unit flatlines at rho regardless of input.
 */
struct AeHyperparams {
    double l2_weight = 1e-5;        // lambda >= 0
    double sparsity_target = 0.05;  // rho in (0,1)
    double sparsity_weight = 0.1;   // beta >= 0

    void validate() const {
        if (!(l2_weight >= 0.0))
            throw ConfigError("l2_weight must be >= 0, got " + std::to_string(l2_weight));
        if (!(sparsity_target > 0.0 && sparsity_target < 1.0))
            throw ConfigError("sparsity_target must be in (0,1), got " +
                              std::to_string(sparsity_target));
        if (!(sparsity_weight >= 0.0))
            throw ConfigError("sparsity_weight must be >= 0, got " +
                              std::to_string(sparsity_weight));
    }
};

/// Hidden activations H = sigmoid(x * w_enc^T + b_enc); every entry in (0,1).
inline Matrix encode(const AutoencoderLayer &layer, const Matrix &x_batch) {
    if (x_batch.cols() != layer.input_size())
        throw ShapeError("encode: batch is " + shape_str(x_batch) + " but layer expects " +
                         std::to_string(layer.input_size()) + " inputs");
    Matrix z = matmul_bt(x_batch, layer.w_enc);
    add_row_vector(z, layer.b_enc);
    return map(z, sigmoid);
}

/// Reconstruction Y = sigmoid(h * w_dec^T + b_dec).
inline Matrix decode(const AutoencoderLayer &layer, const Matrix &h_batch) {
    if (h_batch.cols() != layer.hidden_size())
        throw ShapeError("decode: batch is " + shape_str(h_batch) + " but layer expects " +
                         std::to_string(layer.hidden_size()) + " hidden units");
    Matrix z = matmul_bt(h_batch, layer.w_dec);
    add_row_vector(z, layer.b_dec);
    return map(z, sigmoid);
}

/// Row-wise softmax with max-subtraction; rows sum to 1 and the result is
/// invariant under per-row logit shifts.
inline Matrix softmax_rows(const Matrix &logits) {
    Matrix p(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const double *zi = logits.row(i);
        double *pi = p.row(i);
        double zmax = zi[0];
        for (std::size_t j = 1; j < logits.cols(); ++j) zmax = std::max(zmax, zi[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < logits.cols(); ++j) {
            pi[j] = std::exp(zi[j] - zmax);
            sum += pi[j];
        }
        const double inv = 1.0 / sum;
        for (std::size_t j = 0; j < logits.cols(); ++j) pi[j] *= inv;
    }
    return p;
}

namespace detail {
inline Matrix head_logits(const SoftmaxHead &head, const Matrix &f_batch) {
    if (f_batch.cols() != head.feature_size())
        throw ShapeError("softmax head: batch is " + shape_str(f_batch) +
                         " but head expects " + std::to_string(head.feature_size()) +
                         " features");
    Matrix z = matmul_bt(f_batch, head.w);
    add_row_vector(z, head.b);
    return z;
}

inline void check_labels(const std::vector<int> &labels, std::size_t batch) {
    if (labels.size() != batch)
        throw ShapeError("labels: " + std::to_string(labels.size()) + " labels for batch of " +
                         std::to_string(batch));
    for (int y : labels)
        if (y < 0 || y >= kNumClasses)
            throw ConfigError("label out of range 0..9: " + std::to_string(y));
}
} // namespace detail

/// Class probabilities, one row per sample.
inline Matrix softmax_forward(const SoftmaxHead &head, const Matrix &f_batch) {
    return softmax_rows(detail::head_logits(head, f_batch));
}

/// Mean cross-entropy -(1/B) sum ln p[label], computed through log-sum-exp so
/// saturated logits never produce -inf.
inline double softmax_loss(const SoftmaxHead &head, const Matrix &f_batch,
                           const std::vector<int> &labels) {
    detail::check_labels(labels, f_batch.rows());
    const Matrix z = detail::head_logits(head, f_batch);
    double total = 0.0;
    for (std::size_t i = 0; i < z.rows(); ++i) {
        const double *zi = z.row(i);
        double zmax = zi[0];
        for (std::size_t j = 1; j < z.cols(); ++j) zmax = std::max(zmax, zi[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < z.cols(); ++j) sum += std::exp(zi[j] - zmax);
        total += std::log(sum) - (zi[labels[i]] - zmax);
    }
    return total / static_cast<double>(z.rows());
}

struct SoftmaxGradients {
    double loss = 0.0;
    Matrix grad_w;                      // 10 x f
    std::vector<double> grad_b;         // 10
    Matrix grad_features;               // B x f, backflow for fine-tuning
    Matrix grad_logits;                 // B x 10, equals (p - onehot)/B
};

/// Gradients of the mean cross-entropy w.r.t. head parameters, plus the
/// feature gradient that fine-tuning propagates into the encoder stack.
inline SoftmaxGradients softmax_gradients(const SoftmaxHead &head, const Matrix &f_batch,
                                          const std::vector<int> &labels) {
    detail::check_labels(labels, f_batch.rows());
    const std::size_t batch = f_batch.rows();
    const Matrix z = detail::head_logits(head, f_batch);
    const double inv_b = 1.0 / static_cast<double>(batch);

    SoftmaxGradients g;
    Matrix p = softmax_rows(z);
    double total = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
        const double *zi = z.row(i);
        double zmax = zi[0];
        for (std::size_t j = 1; j < z.cols(); ++j) zmax = std::max(zmax, zi[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < z.cols(); ++j) sum += std::exp(zi[j] - zmax);
        total += std::log(sum) - (zi[labels[i]] - zmax);
    }
    g.loss = total * inv_b;

    g.grad_logits = std::move(p);
    for (std::size_t i = 0; i < batch; ++i) {
        double *gi = g.grad_logits.row(i);
        gi[labels[i]] -= 1.0;
        for (std::size_t j = 0; j < static_cast<std::size_t>(kNumClasses); ++j) gi[j] *= inv_b;
    }
    g.grad_w = matmul_at(g.grad_logits, f_batch);
    g.grad_b = col_sum(g.grad_logits);
    g.grad_features = matmul(g.grad_logits, head.w);
    return g;
}

namespace detail {
/// Clamp for the batch-mean activation before it enters a log.
inline double clamp_rho(double v) {
    const double lo = 1e-10, hi = 1.0 - 1e-10;
    return v < lo ? lo : (v > hi ? hi : v);
}
} // namespace detail

/** Sparse-autoencoder objective on one batch:
 *
 *   mean squared reconstruction error over batch and pixels
 *   + l2_weight * (|w_enc|^2 + |w_dec|^2)                  (biases excluded)
 *   + sparsity_weight * sum_j KL(rho || rho_hat_j)
 *
 * where rho_hat_j is the batch-mean activation of hidden unit j, clamped away
 * from {0,1} so the KL term never becomes NaN.
 */
inline double ae_loss(const AutoencoderLayer &layer, const Matrix &x_batch,
                      const AeHyperparams &hp) {
    layer.validate();
    hp.validate();
    const Matrix h = encode(layer, x_batch);
    const Matrix y = decode(layer, h);

    double mse = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y.data()[i] - x_batch.data()[i];
        mse += d * d;
    }
    mse /= static_cast<double>(y.size());

    double loss = mse + hp.l2_weight * (squared_norm(layer.w_enc) + squared_norm(layer.w_dec));

    if (hp.sparsity_weight > 0.0) {
        const double rho = hp.sparsity_target;
        double kl = 0.0;
        for (double rho_hat : col_mean(h)) {
            const double r = detail::clamp_rho(rho_hat);
            kl += rho * std::log(rho / r) + (1.0 - rho) * std::log((1.0 - rho) / (1.0 - r));
        }
        loss += hp.sparsity_weight * kl;
    }
    return loss;
}

struct AeGradients {
    double loss = 0.0;
    Matrix grad_w_enc;               // m x n
    std::vector<double> grad_b_enc;  // m
    Matrix grad_w_dec;               // n x m
    std::vector<double> grad_b_dec;  // n
};

/// Analytic partials of ae_loss for every layer parameter, including the KL
/// backward term through the batch-mean activation. Shares one forward pass
/// with the loss value it reports.
inline AeGradients ae_gradients(const AutoencoderLayer &layer, const Matrix &x_batch,
                                const AeHyperparams &hp) {
    layer.validate();
    hp.validate();
    const std::size_t batch = x_batch.rows();
    const std::size_t n = layer.input_size();
    const Matrix h = encode(layer, x_batch);
    const Matrix y = decode(layer, h);

    AeGradients g;

    // Reconstruction term and dL/dz through the decoder sigmoid.
    double mse = 0.0;
    Matrix d2(batch, n);
    const double rec_scale = 2.0 / static_cast<double>(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double yi = y.data()[i];
        const double diff = yi - x_batch.data()[i];
        mse += diff * diff;
        d2.data()[i] = rec_scale * diff * yi * (1.0 - yi);
    }
    mse /= static_cast<double>(y.size());

    g.grad_w_dec = matmul_at(d2, h);
    g.grad_b_dec = col_sum(d2);

    // Backflow into the hidden layer: reconstruction path plus KL path.
    Matrix dh = matmul(d2, layer.w_dec);
    double kl = 0.0;
    if (hp.sparsity_weight > 0.0) {
        const double rho = hp.sparsity_target;
        const std::vector<double> rho_hat = col_mean(h);
        const double per_sample = hp.sparsity_weight / static_cast<double>(batch);
        for (std::size_t j = 0; j < rho_hat.size(); ++j) {
            const double r = detail::clamp_rho(rho_hat[j]);
            kl += rho * std::log(rho / r) + (1.0 - rho) * std::log((1.0 - rho) / (1.0 - r));
            const double dkl = -rho / r + (1.0 - rho) / (1.0 - r);
            for (std::size_t i = 0; i < batch; ++i) dh(i, j) += per_sample * dkl;
        }
    }

    Matrix d1(batch, layer.hidden_size());
    for (std::size_t i = 0; i < d1.size(); ++i) {
        const double hi = h.data()[i];
        d1.data()[i] = dh.data()[i] * hi * (1.0 - hi);
    }
    g.grad_w_enc = matmul_at(d1, x_batch);
    g.grad_b_enc = col_sum(d1);

    // L2 term: d(lambda * |w|^2)/dw = 2 * lambda * w.
    if (hp.l2_weight > 0.0) {
        const double two_lambda = 2.0 * hp.l2_weight;
        for (std::size_t i = 0; i < g.grad_w_enc.size(); ++i)
            g.grad_w_enc.data()[i] += two_lambda * layer.w_enc.data()[i];
        for (std::size_t i = 0; i < g.grad_w_dec.size(); ++i)
            g.grad_w_dec.data()[i] += two_lambda * layer.w_dec.data()[i];
    }

    g.loss = mse + hp.l2_weight * (squared_norm(layer.w_enc) + squared_norm(layer.w_dec)) +
             hp.sparsity_weight * kl;
    return g;
}

} // namespace sae
