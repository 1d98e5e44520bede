#pragma once

/// @file autoencoder.hpp Trains one sparse autoencoder with mini-batch
/// momentum SGD and exposes its encoder as a feature extractor.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "sae/common.hpp"
#include "sae/matrix.hpp"
#include "sae/nn.hpp"

namespace sae {

struct TrainConfig {
    std::size_t epochs = 50;
    std::size_t batch_size = 128;
    double learning_rate = 0.5;
    double momentum = 0.9;
    std::uint64_t seed = 0;
    AeHyperparams hyper{};
    // All kernels split work by output row and use fixed associations, so
    // training is reproducible for any thread count; the flag records the
    // caller's intent.
    bool deterministic = true;

    /// Fine-tuning admits learning_rate == 0 as an explicit null update;
    /// feature training does not.
    void validate(bool allow_zero_learning_rate = false) const {
        if (epochs < 1) throw ConfigError("epochs must be >= 1, got " + std::to_string(epochs));
        if (batch_size < 1)
            throw ConfigError("batch_size must be >= 1, got " + std::to_string(batch_size));
        const bool lr_ok = allow_zero_learning_rate ? learning_rate >= 0.0 : learning_rate > 0.0;
        if (!lr_ok || !std::isfinite(learning_rate))
            throw ConfigError("learning_rate must be > 0, got " + std::to_string(learning_rate));
        if (!(momentum >= 0.0 && momentum < 1.0))
            throw ConfigError("momentum must be in [0,1), got " + std::to_string(momentum));
        hyper.validate();
    }
};

struct TrainedAutoencoder {
    AutoencoderLayer layer;
    std::vector<double> loss_history;  // one mean training loss per epoch
};

namespace detail {

inline Matrix gather_rows(const Matrix &src, const std::vector<std::size_t> &idx,
                          std::size_t begin, std::size_t end) {
    Matrix out(end - begin, src.cols());
    for (std::size_t r = begin; r < end; ++r) {
        const double *s = src.row(idx[r]);
        double *d = out.row(r - begin);
        for (std::size_t c = 0; c < src.cols(); ++c) d[c] = s[c];
    }
    return out;
}

/// v = momentum*v - lr*g; p += v.
inline void momentum_step(std::vector<double> &param, std::vector<double> &velocity,
                          const std::vector<double> &grad, double lr, double mu) {
    for (std::size_t i = 0; i < param.size(); ++i) {
        velocity[i] = mu * velocity[i] - lr * grad[i];
        param[i] += velocity[i];
    }
}

inline bool all_finite(const std::vector<double> &v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline void check_layer_finite(const AutoencoderLayer &layer, std::size_t epoch) {
    if (!all_finite(layer.w_enc.data()) || !all_finite(layer.b_enc) ||
        !all_finite(layer.w_dec.data()) || !all_finite(layer.b_dec))
        throw TrainingError("non-finite weights after epoch " + std::to_string(epoch));
}

inline void check_unit_interval(const Matrix &data, const char *who) {
    for (double v : data.data())
        if (!(v >= 0.0 && v <= 1.0))
            throw ConfigError(std::string(who) + ": data entries must lie in [0,1], found " +
                              std::to_string(v));
}

} // namespace detail

/// Fresh layer for training: glorot-initialized weights on independent seed
/// streams, zero biases.
inline AutoencoderLayer make_autoencoder_layer(std::size_t input, std::size_t hidden,
                                               std::uint64_t seed) {
    AutoencoderLayer layer;
    layer.w_enc = glorot_init(hidden, input, derive_seed(seed, 1));
    layer.b_enc.assign(hidden, 0.0);
    layer.w_dec = glorot_init(input, hidden, derive_seed(seed, 2));
    layer.b_dec.assign(input, 0.0);
    return layer;
}

/** Trains a sparse autoencoder on the given data.
 *
 * Mini-batches are drawn from a fresh Fisher-Yates shuffle every epoch (run
 * seed), the last short batch is kept, and the loss history records the
 * sample-weighted mean training loss per epoch. Identical data + config give
 * bit-identical results.
 */
inline TrainedAutoencoder train_autoencoder(const Matrix &data, std::size_t hidden,
                                            const TrainConfig &cfg) {
    cfg.validate();
    if (hidden < 1) throw ConfigError("hidden size must be >= 1, got " + std::to_string(hidden));
    if (data.rows() < 1) throw ConfigError("train_autoencoder: empty dataset");
    detail::check_unit_interval(data, "train_autoencoder");

    TrainedAutoencoder result;
    result.layer = make_autoencoder_layer(data.cols(), hidden, cfg.seed);
    AutoencoderLayer &layer = result.layer;

    std::vector<double> vel_w_enc(layer.w_enc.size(), 0.0);
    std::vector<double> vel_b_enc(layer.b_enc.size(), 0.0);
    std::vector<double> vel_w_dec(layer.w_dec.size(), 0.0);
    std::vector<double> vel_b_dec(layer.b_dec.size(), 0.0);

    Rng shuffle_rng(derive_seed(cfg.seed, 3));
    std::vector<std::size_t> idx(data.rows());
    std::iota(idx.begin(), idx.end(), std::size_t{0});

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        detail::shuffle_indices(idx, shuffle_rng);
        double epoch_loss = 0.0;
        for (std::size_t begin = 0, batch_no = 0; begin < idx.size();
             begin += cfg.batch_size, ++batch_no) {
            const std::size_t end = std::min(idx.size(), begin + cfg.batch_size);
            const Matrix batch = detail::gather_rows(data, idx, begin, end);
            const AeGradients g = ae_gradients(layer, batch, cfg.hyper);
            if (!std::isfinite(g.loss))
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch + 1) +
                                    ", batch " + std::to_string(batch_no + 1));
            epoch_loss += g.loss * static_cast<double>(end - begin);

            detail::momentum_step(layer.w_enc.data(), vel_w_enc, g.grad_w_enc.data(),
                                  cfg.learning_rate, cfg.momentum);
            detail::momentum_step(layer.b_enc, vel_b_enc, g.grad_b_enc,
                                  cfg.learning_rate, cfg.momentum);
            detail::momentum_step(layer.w_dec.data(), vel_w_dec, g.grad_w_dec.data(),
                                  cfg.learning_rate, cfg.momentum);
            detail::momentum_step(layer.b_dec, vel_b_dec, g.grad_b_dec,
                                  cfg.learning_rate, cfg.momentum);
        }
        result.loss_history.push_back(epoch_loss / static_cast<double>(data.rows()));
        detail::check_layer_finite(layer, epoch + 1);
    }
    return result;
}

/// Frozen-encoder feature pass; exactly encode(), no training state touched.
inline Matrix extract_features(const AutoencoderLayer &layer, const Matrix &data) {
    return encode(layer, data);
}

} // namespace sae
