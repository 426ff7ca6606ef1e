#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "medfinder/losses.hpp"
#include "medfinder/matrix.hpp"
#include "medfinder/params.hpp"
#include "medfinder/text.hpp"
#include "medfinder/vision.hpp"
#include "medfinder/volume.hpp"

namespace medfinder {

struct LossConfig {
    double alpha = 1.0;
    double tau = 1.0;
    bool enable_mse = true;
    bool symmetric_sim = false;
};

// One training example after sampling and augmentation have been fixed.
// Views are at encode size (dims divisible by the patch size).
struct PreparedItem {
    TokenSequence tokens;
    Volume view1;
    Volume view2;
};

struct PreparedBatch {
    std::vector<PreparedItem> items;
};

// Full forward pass over a batch. Batch l_mse is the mean over items of the
// per-item view-consistency loss; l_sim is the contrastive loss over the
// n x n score matrix; l_total = l_mse + alpha * l_sim.
LossBreakdown batch_loss(const EncoderParams& params, const ModelConfig& model,
                         const PreparedBatch& batch, const LossConfig& cfg,
                         Matrix* scores_out = nullptr);

// Analytic gradients of l_total for every unfrozen group; frozen groups get
// zero tensors. Accumulation runs in item order so results are reproducible.
EncoderParams batch_gradients(const EncoderParams& params, const ModelConfig& model,
                              const PreparedBatch& batch, const LossConfig& cfg,
                              LossBreakdown* loss_out = nullptr);

struct TrainItem {
    std::string id;
    TokenSequence tokens; // full tokenized report
    Volume volume;        // already resized to encode dims
};

struct TrainConfig {
    LossConfig loss;
    double learning_rate = 0.05;
    std::size_t epochs = 200;
    std::size_t batch_size = 8;
    std::uint64_t seed = 1;
    SamplerConfig sampler;
    AugmentationPolicy aug1; // seed field ignored; per-item seeds are derived
    AugmentationPolicy aug2;
};

struct TrainResult {
    EncoderParams params;
    std::vector<LossBreakdown> history; // per-epoch means over optimizer steps
};

// Plain SGD over shuffled mini-batches. The shuffle and every per-item
// sampling/augmentation seed are pure functions of (config seed, item index),
// so a zero learning rate reproduces the same loss every epoch and reruns are
// bit-identical. Text groups must be frozen; throws ConfigError otherwise.
// Throws NumericError if the loss leaves the finite range.
TrainResult train(const std::vector<TrainItem>& items, EncoderParams params,
                  const ModelConfig& model, const TrainConfig& cfg);

} // namespace medfinder
