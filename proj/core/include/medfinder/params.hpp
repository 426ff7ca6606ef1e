#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace medfinder {

// Named dense tensor, row-major doubles.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    static Tensor zeros(std::vector<std::size_t> shape);
    std::size_t size() const noexcept { return data.size(); }
};

// One trainable (or frozen) weight group. Shapes are fixed at construction;
// frozen groups must stay bitwise constant across a training run.
struct ParamGroup {
    std::string name;
    Tensor tensor;
    bool frozen = false;
};

// All weights of the toy text and vision encoders.
//
// Groups:
//   text.embedding    [vocab_size, dim]   (frozen by default)
//   text.proj_weight  [dim, dim]          (frozen by default)
//   text.proj_bias    [dim]               (frozen by default)
//   vision.patch_weight [dim, patch^3]
//   vision.patch_bias   [dim]
//   vision.cls_weight   [dim]
class EncoderParams {
public:
    void add(ParamGroup group);
    bool has(const std::string& name) const;
    ParamGroup& group(const std::string& name);
    const ParamGroup& group(const std::string& name) const;
    std::vector<ParamGroup>& groups() noexcept { return groups_; }
    const std::vector<ParamGroup>& groups() const noexcept { return groups_; }

    void set_frozen(const std::string& prefix, bool frozen);

    // Checkpoint format (little-endian):
    //   magic "MFPARAMS", u32 version = 1, u32 group count, then per group:
    //   u32 name length, name bytes, u8 frozen, u32 ndim, ndim x u64 dims,
    //   row-major float32 payload.
    void save(const std::filesystem::path& path) const;
    static EncoderParams load(const std::filesystem::path& path);

private:
    std::vector<ParamGroup> groups_;
};

// Same group names and shapes, all-zero tensors. Used for gradients.
EncoderParams zeros_like(const EncoderParams& params);

// Model geometry. Text dim and vision dim are one knob by design: the score
// compares them directly with no projection head.
struct ModelConfig {
    std::size_t vocab_size = 0;
    std::size_t embed_dim = 16;
    std::size_t patch_size = 32;
};

// Random init. `text_variant` selects among frozen text-encoder weight sets
// ("base" or "alt"); vision weights do not depend on it.
EncoderParams init_encoder_params(const ModelConfig& cfg, std::uint64_t seed,
                                  const std::string& text_variant = "base");

// In-place SGD step over unfrozen groups: p -= lr * g.
void sgd_step(EncoderParams& params, const EncoderParams& grads, double learning_rate);

} // namespace medfinder
