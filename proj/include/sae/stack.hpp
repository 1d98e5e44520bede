#pragma once

/// @file stack.hpp The greedy pipeline: first autoencoder on pixels, second
/// on primary features, softmax head on secondary features, then joint
/// fine-tuning of the whole stack. Decoders are dropped after pretraining;
/// only the two encoders and the head make up the deployable model.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "sae/autoencoder.hpp"
#include "sae/common.hpp"
#include "sae/idx.hpp"
#include "sae/matrix.hpp"
#include "sae/nn.hpp"

namespace sae {

/// Encoder half of a trained autoencoder.
struct Encoder {
    Matrix w;               // m x n
    std::vector<double> b;  // m

    std::size_t input_size() const { return w.cols(); }
    std::size_t output_size() const { return w.rows(); }

    Matrix forward(const Matrix &x) const {
        if (x.cols() != w.cols())
            throw ShapeError("Encoder: batch is " + shape_str(x) + " but encoder expects " +
                             std::to_string(w.cols()) + " inputs");
        Matrix z = matmul_bt(x, w);
        add_row_vector(z, b);
        return map(z, sigmoid);
    }
};

inline Encoder encoder_of(const AutoencoderLayer &layer) {
    return Encoder{layer.w_enc, layer.b_enc};
}

/** Two chained encoders plus the softmax head (defaults 784/392/196/10).
 *
 * Class index k is digit k; predictions are directly the digit values.
 */
struct StackedModel {
    Encoder enc1;
    Encoder enc2;
    SoftmaxHead head;

    void validate() const {
        head.validate();
        if (enc1.w.rows() != enc1.b.size() || enc2.w.rows() != enc2.b.size())
            throw ShapeError("StackedModel: encoder bias length mismatch");
        if (enc1.output_size() != enc2.input_size())
            throw ShapeError("StackedModel: enc1 outputs " + std::to_string(enc1.output_size()) +
                             " features but enc2 expects " + std::to_string(enc2.input_size()));
        if (enc2.output_size() != head.feature_size())
            throw ShapeError("StackedModel: enc2 outputs " + std::to_string(enc2.output_size()) +
                             " features but head expects " + std::to_string(head.feature_size()));
    }
};

struct PretrainResult {
    TrainedAutoencoder ae1;
    TrainedAutoencoder ae2;
    Matrix features2;  // N x hidden2, input for the softmax phase
};

/** Greedy phase: AE1 on raw pixels, AE2 on AE1's features.
 *
 * AE1 is frozen before AE2 ever sees data; the second trainer works on a
 * feature matrix, not on AE1 itself.
 */
inline PretrainResult pretrain(const Dataset &train, std::size_t hidden1, std::size_t hidden2,
                               const TrainConfig &cfg1, const TrainConfig &cfg2) {
    PretrainResult r;
    r.ae1 = train_autoencoder(train.images, hidden1, cfg1);
    const Matrix features1 = extract_features(r.ae1.layer, train.images);
    r.ae2 = train_autoencoder(features1, hidden2, cfg2);
    r.features2 = extract_features(r.ae2.layer, features1);
    return r;
}

struct TrainedHead {
    SoftmaxHead head;
    std::vector<double> loss_history;  // mean cross-entropy per epoch
};

/** Cross-entropy training of the softmax head on frozen secondary features.
 *
 * The head starts from zero weights (the problem is convex), so the seed only
 * drives batch shuffling.
 */
inline TrainedHead train_head(const Matrix &features, const std::vector<int> &labels,
                              const TrainConfig &cfg) {
    cfg.validate();
    if (features.rows() != labels.size())
        throw ShapeError("train_head: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(features.rows()) + " feature rows");
    if (features.rows() < 1) throw ConfigError("train_head: empty dataset");

    TrainedHead result;
    result.head = make_zero_head(features.cols());
    SoftmaxHead &head = result.head;

    std::vector<double> vel_w(head.w.size(), 0.0);
    std::vector<double> vel_b(head.b.size(), 0.0);

    Rng shuffle_rng(derive_seed(cfg.seed, 4));
    std::vector<std::size_t> idx(features.rows());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::vector<int> batch_labels;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        detail::shuffle_indices(idx, shuffle_rng);
        double epoch_loss = 0.0;
        for (std::size_t begin = 0, batch_no = 0; begin < idx.size();
             begin += cfg.batch_size, ++batch_no) {
            const std::size_t end = std::min(idx.size(), begin + cfg.batch_size);
            const Matrix batch = detail::gather_rows(features, idx, begin, end);
            batch_labels.resize(end - begin);
            for (std::size_t r = begin; r < end; ++r) batch_labels[r - begin] = labels[idx[r]];

            const SoftmaxGradients g = softmax_gradients(head, batch, batch_labels);
            if (!std::isfinite(g.loss))
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch + 1) +
                                    ", batch " + std::to_string(batch_no + 1));
            epoch_loss += g.loss * static_cast<double>(end - begin);

            detail::momentum_step(head.w.data(), vel_w, g.grad_w.data(),
                                  cfg.learning_rate, cfg.momentum);
            detail::momentum_step(head.b, vel_b, g.grad_b, cfg.learning_rate, cfg.momentum);
        }
        result.loss_history.push_back(epoch_loss / static_cast<double>(features.rows()));
    }
    return result;
}

/// Cross-entropy of the full stack on a batch; the quantity fine-tuning
/// minimizes.
inline double stack_loss(const StackedModel &model, const Matrix &x_batch,
                         const std::vector<int> &labels) {
    model.validate();
    const Matrix h1 = model.enc1.forward(x_batch);
    const Matrix h2 = model.enc2.forward(h1);
    return softmax_loss(model.head, h2, labels);
}

struct StackGradients {
    double loss = 0.0;
    Matrix grad_w1;
    std::vector<double> grad_b1;
    Matrix grad_w2;
    std::vector<double> grad_b2;
    Matrix grad_w_head;
    std::vector<double> grad_b_head;
};

/// Analytic gradient of stack_loss for every parameter of both encoders and
/// the head (one backward sweep through the three sigmoid/softmax stages).
inline StackGradients stack_gradients(const StackedModel &model, const Matrix &x_batch,
                                      const std::vector<int> &labels) {
    model.validate();
    const Matrix h1 = model.enc1.forward(x_batch);
    const Matrix h2 = model.enc2.forward(h1);

    StackGradients g;
    SoftmaxGradients hg = softmax_gradients(model.head, h2, labels);
    g.loss = hg.loss;
    g.grad_w_head = std::move(hg.grad_w);
    g.grad_b_head = std::move(hg.grad_b);

    Matrix d2(h2.rows(), h2.cols());
    for (std::size_t i = 0; i < d2.size(); ++i) {
        const double h = h2.data()[i];
        d2.data()[i] = hg.grad_features.data()[i] * h * (1.0 - h);
    }
    g.grad_w2 = matmul_at(d2, h1);
    g.grad_b2 = col_sum(d2);

    const Matrix dh1 = matmul(d2, model.enc2.w);
    Matrix d1(h1.rows(), h1.cols());
    for (std::size_t i = 0; i < d1.size(); ++i) {
        const double h = h1.data()[i];
        d1.data()[i] = dh1.data()[i] * h * (1.0 - h);
    }
    g.grad_w1 = matmul_at(d1, x_batch);
    g.grad_b1 = col_sum(d1);
    return g;
}

struct FineTuneResult {
    StackedModel model;
    std::vector<double> accuracy_history;  // running training accuracy per epoch
};

/** Joint backpropagation of the classification loss through all layers.
 *
 * Per-epoch accuracy is accumulated from each batch's predictions before its
 * update (running training accuracy).
 */
inline FineTuneResult fine_tune(StackedModel model, const Dataset &train,
                                const TrainConfig &cfg) {
    cfg.validate(/*allow_zero_learning_rate=*/true);
    model.validate();
    if (train.size() < 1) throw ConfigError("fine_tune: empty dataset");
    if (train.images.cols() != model.enc1.input_size())
        throw ShapeError("fine_tune: images are " + shape_str(train.images) +
                         " but model expects " + std::to_string(model.enc1.input_size()) +
                         " inputs");
    detail::check_unit_interval(train.images, "fine_tune");

    std::vector<double> vel_w1(model.enc1.w.size(), 0.0), vel_b1(model.enc1.b.size(), 0.0);
    std::vector<double> vel_w2(model.enc2.w.size(), 0.0), vel_b2(model.enc2.b.size(), 0.0);
    std::vector<double> vel_wh(model.head.w.size(), 0.0), vel_bh(model.head.b.size(), 0.0);

    Rng shuffle_rng(derive_seed(cfg.seed, 5));
    std::vector<std::size_t> idx(train.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::vector<int> batch_labels;

    FineTuneResult result;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        detail::shuffle_indices(idx, shuffle_rng);
        std::size_t correct = 0;
        for (std::size_t begin = 0, batch_no = 0; begin < idx.size();
             begin += cfg.batch_size, ++batch_no) {
            const std::size_t end = std::min(idx.size(), begin + cfg.batch_size);
            const Matrix batch = detail::gather_rows(train.images, idx, begin, end);
            batch_labels.resize(end - begin);
            for (std::size_t r = begin; r < end; ++r) batch_labels[r - begin] = train.labels[idx[r]];

            // Forward (kept for the accuracy tally), then the shared backward.
            const Matrix h1 = model.enc1.forward(batch);
            const Matrix h2 = model.enc2.forward(h1);
            SoftmaxGradients hg = softmax_gradients(model.head, h2, batch_labels);
            if (!std::isfinite(hg.loss))
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch + 1) +
                                    ", batch " + std::to_string(batch_no + 1));

            const Matrix probs = softmax_forward(model.head, h2);
            for (std::size_t r = 0; r < probs.rows(); ++r) {
                const double *p = probs.row(r);
                int arg = 0;
                for (int j = 1; j < kNumClasses; ++j)
                    if (p[j] > p[arg]) arg = j;
                if (arg == batch_labels[r]) ++correct;
            }

            Matrix d2(h2.rows(), h2.cols());
            for (std::size_t i = 0; i < d2.size(); ++i) {
                const double h = h2.data()[i];
                d2.data()[i] = hg.grad_features.data()[i] * h * (1.0 - h);
            }
            const Matrix gw2 = matmul_at(d2, h1);
            const std::vector<double> gb2 = col_sum(d2);

            const Matrix dh1 = matmul(d2, model.enc2.w);
            Matrix d1(h1.rows(), h1.cols());
            for (std::size_t i = 0; i < d1.size(); ++i) {
                const double h = h1.data()[i];
                d1.data()[i] = dh1.data()[i] * h * (1.0 - h);
            }
            const Matrix gw1 = matmul_at(d1, batch);
            const std::vector<double> gb1 = col_sum(d1);

            detail::momentum_step(model.enc1.w.data(), vel_w1, gw1.data(),
                                  cfg.learning_rate, cfg.momentum);
            detail::momentum_step(model.enc1.b, vel_b1, gb1, cfg.learning_rate, cfg.momentum);
            detail::momentum_step(model.enc2.w.data(), vel_w2, gw2.data(),
                                  cfg.learning_rate, cfg.momentum);
            detail::momentum_step(model.enc2.b, vel_b2, gb2, cfg.learning_rate, cfg.momentum);
            detail::momentum_step(model.head.w.data(), vel_wh, hg.grad_w.data(),
                                  cfg.learning_rate, cfg.momentum);
            detail::momentum_step(model.head.b, vel_bh, hg.grad_b, cfg.learning_rate, cfg.momentum);
        }
        result.accuracy_history.push_back(static_cast<double>(correct) /
                                          static_cast<double>(train.size()));
    }
    result.model = std::move(model);
    return result;
}

/// Argmax of the class probabilities; ties break toward the lower digit.
inline std::vector<int> predict(const StackedModel &model, const Matrix &images) {
    model.validate();
    const Matrix h1 = model.enc1.forward(images);
    const Matrix h2 = model.enc2.forward(h1);
    const Matrix probs = softmax_forward(model.head, h2);
    std::vector<int> out(probs.rows());
    for (std::size_t r = 0; r < probs.rows(); ++r) {
        const double *p = probs.row(r);
        int arg = 0;
        for (int j = 1; j < kNumClasses; ++j)
            if (p[j] > p[arg]) arg = j;
        out[r] = arg;
    }
    return out;
}

} // namespace sae
