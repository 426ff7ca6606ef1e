#include "medfinder/params.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "medfinder/common.hpp"
#include "medfinder/rng.hpp"

namespace medfinder {

namespace {

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

void write_f32(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32(out, bits);
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t read_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

float read_f32(std::istream& in) {
    const std::uint32_t bits = read_u32(in);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

constexpr char kMagic[8] = {'M', 'F', 'P', 'A', 'R', 'A', 'M', 'S'};

void fill_uniform(Tensor& t, Rng& rng, double lo, double hi) {
    for (double& v : t.data) v = rng.uniform(lo, hi);
}

} // namespace

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    Tensor t;
    t.shape = std::move(shape);
    t.data.assign(n, 0.0);
    return t;
}

void EncoderParams::add(ParamGroup group) {
    if (has(group.name)) throw DataError("duplicate parameter group: " + group.name);
    groups_.push_back(std::move(group));
}

bool EncoderParams::has(const std::string& name) const {
    return std::any_of(groups_.begin(), groups_.end(),
                       [&](const ParamGroup& g) { return g.name == name; });
}

ParamGroup& EncoderParams::group(const std::string& name) {
    for (ParamGroup& g : groups_)
        if (g.name == name) return g;
    throw DataError("unknown parameter group: " + name);
}

const ParamGroup& EncoderParams::group(const std::string& name) const {
    for (const ParamGroup& g : groups_)
        if (g.name == name) return g;
    throw DataError("unknown parameter group: " + name);
}

void EncoderParams::set_frozen(const std::string& prefix, bool frozen) {
    for (ParamGroup& g : groups_)
        if (g.name.rfind(prefix, 0) == 0) g.frozen = frozen;
}

void EncoderParams::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path.string());
    out.write(kMagic, sizeof(kMagic));
    write_u32(out, 1);
    write_u32(out, static_cast<std::uint32_t>(groups_.size()));
    for (const ParamGroup& g : groups_) {
        write_u32(out, static_cast<std::uint32_t>(g.name.size()));
        out.write(g.name.data(), static_cast<std::streamsize>(g.name.size()));
        out.put(g.frozen ? '\1' : '\0');
        write_u32(out, static_cast<std::uint32_t>(g.tensor.shape.size()));
        for (std::size_t d : g.tensor.shape) write_u64(out, d);
        for (double v : g.tensor.data) write_f32(out, static_cast<float>(v));
    }
    if (!out) throw DataError("short write on checkpoint: " + path.string());
}

EncoderParams EncoderParams::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw DataError("not a checkpoint file: " + path.string());
    const std::uint32_t version = read_u32(in);
    if (version != 1) throw DataError("unsupported checkpoint version");
    const std::uint32_t count = read_u32(in);
    EncoderParams params;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = read_u32(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const int frozen = in.get();
        const std::uint32_t ndim = read_u32(in);
        std::vector<std::size_t> shape(ndim);
        for (std::uint32_t d = 0; d < ndim; ++d) shape[d] = static_cast<std::size_t>(read_u64(in));
        Tensor t = Tensor::zeros(shape);
        for (double& v : t.data) v = static_cast<double>(read_f32(in));
        if (!in) throw DataError("truncated checkpoint: " + path.string());
        params.add({std::move(name), std::move(t), frozen != 0});
    }
    return params;
}

EncoderParams zeros_like(const EncoderParams& params) {
    EncoderParams out;
    for (const ParamGroup& g : params.groups())
        out.add({g.name, Tensor::zeros(g.tensor.shape), g.frozen});
    return out;
}

EncoderParams init_encoder_params(const ModelConfig& cfg, std::uint64_t seed,
                                  const std::string& text_variant) {
    if (cfg.vocab_size < 2) throw ConfigError("vocab_size must cover the reserved indices");
    if (cfg.embed_dim < 1) throw ConfigError("embed_dim must be >= 1");
    if (cfg.patch_size < 1) throw ConfigError("patch_size must be >= 1");

    const std::size_t dim = cfg.embed_dim;
    const std::size_t patch_len = cfg.patch_size * cfg.patch_size * cfg.patch_size;

    EncoderParams params;

    // Text weights depend on the variant so ablations compare two distinct
    // frozen encoders behind the same interface.
    Rng text_rng(derive_seed(seed, hash_string("text:" + text_variant)));
    Tensor embedding = Tensor::zeros({cfg.vocab_size, dim});
    fill_uniform(embedding, text_rng, -1.0, 1.0);
    Tensor proj_w = Tensor::zeros({dim, dim});
    fill_uniform(proj_w, text_rng, -1.0 / std::sqrt(static_cast<double>(dim)),
                 1.0 / std::sqrt(static_cast<double>(dim)));
    Tensor proj_b = Tensor::zeros({dim});
    fill_uniform(proj_b, text_rng, -0.1, 0.1);
    params.add({"text.embedding", std::move(embedding), true});
    params.add({"text.proj_weight", std::move(proj_w), true});
    params.add({"text.proj_bias", std::move(proj_b), true});

    Rng vision_rng(derive_seed(seed, hash_string("vision")));
    Tensor patch_w = Tensor::zeros({dim, patch_len});
    fill_uniform(patch_w, vision_rng, -1.0 / std::sqrt(static_cast<double>(patch_len)),
                 1.0 / std::sqrt(static_cast<double>(patch_len)));
    Tensor patch_b = Tensor::zeros({dim});
    fill_uniform(patch_b, vision_rng, -0.1, 0.1);
    Tensor cls_w = Tensor::zeros({dim});
    fill_uniform(cls_w, vision_rng, -1.0, 1.0);
    params.add({"vision.patch_weight", std::move(patch_w), false});
    params.add({"vision.patch_bias", std::move(patch_b), false});
    params.add({"vision.cls_weight", std::move(cls_w), false});

    return params;
}

void sgd_step(EncoderParams& params, const EncoderParams& grads, double learning_rate) {
    for (ParamGroup& g : params.groups()) {
        if (g.frozen) continue;
        const Tensor& grad = grads.group(g.name).tensor;
        if (grad.data.size() != g.tensor.data.size())
            throw DataError("gradient shape mismatch for group " + g.name);
        for (std::size_t i = 0; i < g.tensor.data.size(); ++i)
            g.tensor.data[i] -= learning_rate * grad.data[i];
    }
}

} // namespace medfinder
