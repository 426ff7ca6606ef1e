#include "medfinder/vision.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "medfinder/common.hpp"
#include "medfinder/rng.hpp"

namespace medfinder {

namespace {

double lerp(double a, double b, double t) noexcept { return a + t * (b - a); }

// Endpoint-aligned source coordinate for output index i.
double source_coord(std::size_t i, std::size_t in_len, std::size_t out_len) noexcept {
    if (out_len == 1) return static_cast<double>(in_len - 1) / 2.0;
    return static_cast<double>(i) * static_cast<double>(in_len - 1)
         / static_cast<double>(out_len - 1);
}

struct AxisSample {
    std::size_t lo;
    std::size_t hi;
    double frac;
};

AxisSample axis_sample(std::size_t i, std::size_t in_len, std::size_t out_len) noexcept {
    const double c = source_coord(i, in_len, out_len);
    const double floor_c = std::floor(c);
    AxisSample s;
    s.lo = static_cast<std::size_t>(floor_c);
    s.hi = std::min(s.lo + 1, in_len - 1);
    s.frac = c - floor_c;
    return s;
}

} // namespace

RotationAxis rotation_axis_from_name(const std::string& name) {
    if (name == "none") return RotationAxis::none;
    if (name == "width") return RotationAxis::width;
    if (name == "height") return RotationAxis::height;
    if (name == "depth") return RotationAxis::depth;
    throw ConfigError("unknown rotation axis: " + name);
}

std::string rotation_axis_name(RotationAxis axis) {
    switch (axis) {
        case RotationAxis::none: return "none";
        case RotationAxis::width: return "width";
        case RotationAxis::height: return "height";
        case RotationAxis::depth: return "depth";
    }
    return "none";
}

Volume resize_trilinear(const Volume& v, std::size_t width, std::size_t height,
                        std::size_t depth) {
    if (width < 1 || height < 1 || depth < 1)
        throw ConfigError("resize target dims must be >= 1");
    if (!all_finite(v)) throw DataError("resize input has non-finite voxels");
    if (width == v.width && height == v.height && depth == v.depth) return v;

    Volume out(width, height, depth);
    for (std::size_t d = 0; d < depth; ++d) {
        const AxisSample sd = axis_sample(d, v.depth, depth);
        for (std::size_t h = 0; h < height; ++h) {
            const AxisSample sh = axis_sample(h, v.height, height);
            for (std::size_t w = 0; w < width; ++w) {
                const AxisSample sw = axis_sample(w, v.width, width);
                const double c000 = v.at(sw.lo, sh.lo, sd.lo);
                const double c100 = v.at(sw.hi, sh.lo, sd.lo);
                const double c010 = v.at(sw.lo, sh.hi, sd.lo);
                const double c110 = v.at(sw.hi, sh.hi, sd.lo);
                const double c001 = v.at(sw.lo, sh.lo, sd.hi);
                const double c101 = v.at(sw.hi, sh.lo, sd.hi);
                const double c011 = v.at(sw.lo, sh.hi, sd.hi);
                const double c111 = v.at(sw.hi, sh.hi, sd.hi);
                const double front = lerp(lerp(c000, c100, sw.frac), lerp(c010, c110, sw.frac), sh.frac);
                const double back = lerp(lerp(c001, c101, sw.frac), lerp(c011, c111, sw.frac), sh.frac);
                out.at(w, h, d) = static_cast<float>(lerp(front, back, sd.frac));
            }
        }
    }
    return out;
}

Volume rotate_quarter(const Volume& v, RotationAxis axis, int turns) {
    turns = ((turns % 4) + 4) % 4;
    if (axis == RotationAxis::none || turns == 0) return v;

    Volume cur = v;
    for (int t = 0; t < turns; ++t) {
        Volume next;
        switch (axis) {
            case RotationAxis::depth:
                next = Volume(cur.height, cur.width, cur.depth);
                for (std::size_t d = 0; d < cur.depth; ++d)
                    for (std::size_t h = 0; h < cur.height; ++h)
                        for (std::size_t w = 0; w < cur.width; ++w)
                            next.at(cur.height - 1 - h, w, d) = cur.at(w, h, d);
                break;
            case RotationAxis::width:
                next = Volume(cur.width, cur.depth, cur.height);
                for (std::size_t d = 0; d < cur.depth; ++d)
                    for (std::size_t h = 0; h < cur.height; ++h)
                        for (std::size_t w = 0; w < cur.width; ++w)
                            next.at(w, cur.depth - 1 - d, h) = cur.at(w, h, d);
                break;
            case RotationAxis::height:
                next = Volume(cur.depth, cur.height, cur.width);
                for (std::size_t d = 0; d < cur.depth; ++d)
                    for (std::size_t h = 0; h < cur.height; ++h)
                        for (std::size_t w = 0; w < cur.width; ++w)
                            next.at(cur.depth - 1 - d, h, w) = cur.at(w, h, d);
                break;
            case RotationAxis::none:
                next = cur;
                break;
        }
        cur = std::move(next);
    }
    return cur;
}

Volume augment(const Volume& v, const AugmentationPolicy& policy, const Volume* partner) {
    if (policy.noise_sigma < 0.0) throw ConfigError("noise_sigma must be >= 0");
    if (policy.cutmix_fraction < 0.0 || policy.cutmix_fraction >= 1.0)
        throw ConfigError("cutmix_fraction must be in [0, 1)");
    if (policy.rotation_turns < 0 || policy.rotation_turns > 3)
        throw ConfigError("rotation_turns must be in [0, 3]");
    if (policy.is_identity()) return v;

    Rng rng(policy.seed);
    Volume out = v;

    if (policy.cutmix_fraction > 0.0) {
        if (partner == nullptr) throw DataError("cutmix requires a partner volume");
        if (partner->width != v.width || partner->height != v.height
            || partner->depth != v.depth)
            throw DataError("cutmix partner dims must match");
        const double side = std::cbrt(policy.cutmix_fraction);
        auto extent = [&](std::size_t len) {
            const auto b = static_cast<std::size_t>(
                std::llround(static_cast<double>(len) * side));
            return std::clamp<std::size_t>(b, 1, len);
        };
        const std::size_t bw = extent(v.width);
        const std::size_t bh = extent(v.height);
        const std::size_t bd = extent(v.depth);
        const std::size_t x0 = static_cast<std::size_t>(rng.uniform_u64(v.width - bw + 1));
        const std::size_t y0 = static_cast<std::size_t>(rng.uniform_u64(v.height - bh + 1));
        const std::size_t z0 = static_cast<std::size_t>(rng.uniform_u64(v.depth - bd + 1));
        for (std::size_t d = z0; d < z0 + bd; ++d)
            for (std::size_t h = y0; h < y0 + bh; ++h)
                for (std::size_t w = x0; w < x0 + bw; ++w)
                    out.at(w, h, d) = partner->at(w, h, d);
    }

    out = rotate_quarter(out, policy.rotation_axis, policy.rotation_turns);

    if (policy.noise_sigma > 0.0) {
        for (float& x : out.voxels)
            x = static_cast<float>(static_cast<double>(x) + rng.normal(0.0, policy.noise_sigma));
    }
    return out;
}

std::size_t patch_token_count(const Volume& v, std::size_t patch_size) {
    if (patch_size < 1) throw ConfigError("patch_size must be >= 1");
    if (v.width % patch_size || v.height % patch_size || v.depth % patch_size)
        throw DataError("volume dims must be divisible by the patch size");
    return (v.width / patch_size) * (v.height / patch_size) * (v.depth / patch_size);
}

VisionEncoder::VisionEncoder(const EncoderParams& params, const ModelConfig& cfg)
    : params_(params), cfg_(cfg) {
    const Tensor& w = params_.group("vision.patch_weight").tensor;
    const std::size_t patch_len = cfg_.patch_size * cfg_.patch_size * cfg_.patch_size;
    if (w.shape.size() != 2 || w.shape[0] != cfg_.embed_dim || w.shape[1] != patch_len)
        throw DataError("vision patch weight shape does not match configuration");
}

VolumeEncoding VisionEncoder::encode(const Volume& v) const {
    const std::size_t p = cfg_.patch_size;
    const std::size_t dim = cfg_.embed_dim;
    const std::size_t n_tokens = patch_token_count(v, p);
    const std::size_t patch_len = p * p * p;
    const Tensor& weight = params_.group("vision.patch_weight").tensor;
    const Tensor& bias = params_.group("vision.patch_bias").tensor;
    const Tensor& cls_w = params_.group("vision.cls_weight").tensor;

    const std::size_t gw = v.width / p, gh = v.height / p, gd = v.depth / p;

    TokenMatrix tokens(n_tokens, dim);
    std::vector<double> patch(patch_len);
    for (std::size_t pd = 0; pd < gd; ++pd) {
        for (std::size_t ph = 0; ph < gh; ++ph) {
            for (std::size_t pw = 0; pw < gw; ++pw) {
                const std::size_t t = (pd * gh + ph) * gw + pw;
                std::size_t j = 0;
                for (std::size_t dz = 0; dz < p; ++dz)
                    for (std::size_t dy = 0; dy < p; ++dy)
                        for (std::size_t dx = 0; dx < p; ++dx)
                            patch[j++] = static_cast<double>(
                                v.at(pw * p + dx, ph * p + dy, pd * p + dz));
                for (std::size_t r = 0; r < dim; ++r) {
                    const double* wrow = weight.data.data() + r * patch_len;
                    double acc = bias.data[r];
                    for (std::size_t k = 0; k < patch_len; ++k) acc += wrow[k] * patch[k];
                    tokens.at(t, r) = std::tanh(acc);
                }
            }
        }
    }

    // CLS pooling: softmax over token scores against the learned direction.
    std::vector<double> scores(n_tokens);
    double max_score = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n_tokens; ++t) {
        scores[t] = dot(tokens.row(t), {cls_w.data.data(), dim});
        max_score = std::max(max_score, scores[t]);
    }
    double z = 0.0;
    for (std::size_t t = 0; t < n_tokens; ++t) {
        scores[t] = std::exp(scores[t] - max_score);
        z += scores[t];
    }
    std::vector<double> cls(dim, 0.0);
    for (std::size_t t = 0; t < n_tokens; ++t) {
        const double w_t = scores[t] / z;
        for (std::size_t d = 0; d < dim; ++d) cls[d] += w_t * tokens.at(t, d);
    }
    return {std::move(tokens), EmbeddingVector(std::move(cls))};
}

} // namespace medfinder
