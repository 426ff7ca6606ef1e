#pragma once

#include <cstdint>
#include <string>

#include "medfinder/matrix.hpp"
#include "medfinder/params.hpp"
#include "medfinder/volume.hpp"

namespace medfinder {

enum class RotationAxis { none, width, height, depth };

RotationAxis rotation_axis_from_name(const std::string& name);
std::string rotation_axis_name(RotationAxis axis);

// View augmentation. Applied as cutmix -> rotation -> noise, all driven by
// one seeded stream. The identity policy (sigma 0, no rotation, cutmix 0)
// returns the input volume unchanged.
struct AugmentationPolicy {
    double noise_sigma = 0.0;
    RotationAxis rotation_axis = RotationAxis::none;
    int rotation_turns = 0;        // quarter turns, 0..3
    double cutmix_fraction = 0.0;  // in [0, 1)
    std::uint64_t seed = 0;

    bool is_identity() const noexcept {
        return noise_sigma == 0.0 && (rotation_axis == RotationAxis::none || rotation_turns == 0)
            && cutmix_fraction == 0.0;
    }
};

// Trilinear resize with endpoint-aligned coordinates (a target axis of length
// 1 samples the source center). Exact identity when dims already match;
// constants are preserved exactly because interpolation is nested lerps.
Volume resize_trilinear(const Volume& v, std::size_t width, std::size_t height,
                        std::size_t depth);

// Quarter-turn rotation about one axis; dims of the other two axes swap.
Volume rotate_quarter(const Volume& v, RotationAxis axis, int turns);

// Cutmix requires a partner of equal dims when cutmix_fraction > 0. The
// replaced box has per-axis extent round(len * fraction^(1/3)).
Volume augment(const Volume& v, const AugmentationPolicy& policy,
               const Volume* partner = nullptr);

struct VolumeEncoding {
    TokenMatrix tokens;  // (patch count) x dim
    EmbeddingVector cls; // softmax-weighted mean of token rows
};

// Toy 3D encoder: each non-overlapping p^3 patch is flattened, affinely
// projected to `dim` features and passed through tanh. The CLS vector pools
// token rows with softmax weights from a learned direction.
class VisionEncoder {
public:
    VisionEncoder(const EncoderParams& params, const ModelConfig& cfg);

    VolumeEncoding encode(const Volume& v) const;

    std::size_t token_dim() const noexcept { return cfg_.embed_dim; }
    std::size_t patch_size() const noexcept { return cfg_.patch_size; }

private:
    const EncoderParams& params_;
    ModelConfig cfg_;
};

// Patch-grid token count; throws DataError unless all dims are divisible by p.
std::size_t patch_token_count(const Volume& v, std::size_t patch_size);

} // namespace medfinder
