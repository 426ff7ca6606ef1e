#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "medfinder/text.hpp"
#include "medfinder/training.hpp"
#include "medfinder/vision.hpp"

namespace medfinder {

// One resolved run configuration: paths plus every hyperparameter. Loaded
// from a strict JSON file (unknown keys are rejected); CLI flags override
// file values. Commands validate existence of the paths they consume.
struct RunConfig {
    std::string manifest;
    std::string volumes_root; // defaults to the manifest's directory
    std::string vocab;
    std::string patterns;
    std::string stopwords;
    std::string checkpoint;
    std::string history;

    std::size_t embed_dim = 16;
    std::size_t patch_size = 32;
    std::array<std::size_t, 3> target_dims = {96, 96, 96};

    double alpha = 1.0;
    double tau = 1.0;
    double learning_rate = 0.05;
    std::size_t epochs = 200;
    std::size_t batch_size = 8;
    std::uint64_t seed = 1;

    std::string sampler_mode = "contiguous";
    std::size_t sample_length = 100;
    std::size_t sample_words = 64;

    bool enable_mse = true;
    bool symmetric_sim = false;
    std::string encoder_variant = "base";

    AugmentationPolicy aug1;
    AugmentationPolicy aug2;

    std::string keyword_pool = "labeled"; // or "all"
    std::string eval_split = "test";

    SamplerConfig sampler() const;
    LossConfig loss() const;
    TrainConfig train() const;
    ModelConfig model(std::size_t vocab_size) const;

    // Range and cross-field checks (positive dims, divisibility, enums).
    void validate() const;

    // Deterministic single-line JSON of every field, for run logging.
    std::string resolved_json() const;
};

RunConfig load_run_config(const std::filesystem::path& path);

// Resolves `path` against the directory containing the manifest.
std::filesystem::path resolve_volumes_root(const RunConfig& cfg);

} // namespace medfinder
