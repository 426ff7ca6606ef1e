#include "medfinder/text.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "medfinder/common.hpp"
#include "medfinder/rng.hpp"

namespace medfinder {

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) : tokens_(tokens) {
    sorted_.resize(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) sorted_[i] = i;
    std::sort(sorted_.begin(), sorted_.end(),
              [&](std::size_t a, std::size_t b) { return tokens_[a] < tokens_[b]; });
    for (std::size_t i = 1; i < sorted_.size(); ++i)
        if (tokens_[sorted_[i - 1]] == tokens_[sorted_[i]])
            throw DataError("duplicate vocabulary token: " + tokens_[sorted_[i]]);
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open vocabulary: " + path.string());
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        tokens.push_back(line);
    }
    return Vocabulary(tokens);
}

void Vocabulary::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write vocabulary: " + path.string());
    for (const std::string& t : tokens_) out << t << '\n';
}

std::uint32_t Vocabulary::index_of(const std::string& token) const noexcept {
    auto it = std::lower_bound(sorted_.begin(), sorted_.end(), token,
                               [&](std::size_t i, const std::string& t) { return tokens_[i] < t; });
    if (it != sorted_.end() && tokens_[*it] == token)
        return static_cast<std::uint32_t>(*it + 2);
    return kUnknown;
}

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> words;
    std::string word;
    auto flush = [&] {
        if (!word.empty()) words.push_back(word);
        word.clear();
    };
    for (unsigned char c : text) {
        if (std::isspace(c) || std::ispunct(c)) flush();
        else word += static_cast<char>(std::tolower(c));
    }
    flush();
    return words;
}

TokenSequence tokenize(const std::string& text, const Vocabulary& vocab) {
    if (vocab.size() <= 2) throw DataError("vocabulary has no real tokens");
    TokenSequence seq;
    for (const std::string& w : split_words(text)) seq.indices.push_back(vocab.index_of(w));
    seq.original_length = seq.indices.size();
    return seq;
}

SamplerConfig::Mode sampler_mode_from_name(const std::string& name) {
    if (name == "contiguous") return SamplerConfig::Mode::contiguous;
    if (name == "random_words") return SamplerConfig::Mode::random_words;
    if (name == "off") return SamplerConfig::Mode::off;
    throw ConfigError("unknown sampler_mode: " + name);
}

std::string sampler_mode_name(SamplerConfig::Mode mode) {
    switch (mode) {
        case SamplerConfig::Mode::contiguous: return "contiguous";
        case SamplerConfig::Mode::random_words: return "random_words";
        case SamplerConfig::Mode::off: return "off";
    }
    return "contiguous";
}

TokenSequence truncate_text(const TokenSequence& t, std::size_t length) {
    TokenSequence out;
    const std::size_t n = std::min(length, t.indices.size());
    out.indices.assign(t.indices.begin(), t.indices.begin() + static_cast<std::ptrdiff_t>(n));
    out.original_length = t.original_length;
    return out;
}

TokenSequence sample_text(const TokenSequence& t, const SamplerConfig& cfg, std::uint64_t seed) {
    const std::size_t len = t.indices.size();
    switch (cfg.mode) {
        case SamplerConfig::Mode::off:
            return truncate_text(t, cfg.length);
        case SamplerConfig::Mode::contiguous: {
            if (cfg.length < 1) throw ConfigError("sampler length must be >= 1");
            if (len <= cfg.length) return t;
            Rng rng(seed);
            const std::size_t start =
                static_cast<std::size_t>(rng.uniform_u64(len - cfg.length + 1));
            TokenSequence out;
            out.indices.assign(t.indices.begin() + static_cast<std::ptrdiff_t>(start),
                               t.indices.begin() + static_cast<std::ptrdiff_t>(start + cfg.length));
            out.original_length = t.original_length;
            return out;
        }
        case SamplerConfig::Mode::random_words: {
            if (cfg.words < 1) throw ConfigError("sampler words must be >= 1");
            if (len <= cfg.words) return t;
            // Partial Fisher-Yates picks M distinct positions; sorting keeps
            // the original order.
            std::vector<std::size_t> positions(len);
            for (std::size_t i = 0; i < len; ++i) positions[i] = i;
            Rng rng(seed);
            for (std::size_t i = 0; i < cfg.words; ++i) {
                const std::size_t j =
                    i + static_cast<std::size_t>(rng.uniform_u64(len - i));
                std::swap(positions[i], positions[j]);
            }
            positions.resize(cfg.words);
            std::sort(positions.begin(), positions.end());
            TokenSequence out;
            out.indices.reserve(cfg.words);
            for (std::size_t p : positions) out.indices.push_back(t.indices[p]);
            out.original_length = t.original_length;
            return out;
        }
    }
    throw ConfigError("unreachable sampler mode");
}

TextEncoder::TextEncoder(const EncoderParams& params, const ModelConfig& cfg)
    : params_(params), cfg_(cfg) {
    const Tensor& emb = params_.group("text.embedding").tensor;
    if (emb.shape.size() != 2 || emb.shape[0] != cfg_.vocab_size || emb.shape[1] != cfg_.embed_dim)
        throw DataError("text embedding shape does not match vocabulary/dim configuration");
}

bool TextEncoder::frozen() const {
    for (const ParamGroup& g : params_.groups())
        if (g.name.rfind("text.", 0) == 0 && !g.frozen) return false;
    return true;
}

EmbeddingVector TextEncoder::encode(const TokenSequence& t) const {
    const std::size_t dim = cfg_.embed_dim;
    const Tensor& emb = params_.group("text.embedding").tensor;
    const Tensor& w = params_.group("text.proj_weight").tensor;
    const Tensor& b = params_.group("text.proj_bias").tensor;

    std::vector<std::uint32_t> indices = t.indices;
    if (indices.empty()) indices.push_back(Vocabulary::kPadding);

    std::vector<double> mean(dim, 0.0);
    for (std::uint32_t idx : indices) {
        if (idx >= cfg_.vocab_size) throw DataError("token index out of vocabulary range");
        const double* row = emb.data.data() + static_cast<std::size_t>(idx) * dim;
        for (std::size_t d = 0; d < dim; ++d) mean[d] += row[d];
    }
    const double inv_len = 1.0 / static_cast<double>(indices.size());
    for (double& v : mean) v *= inv_len;

    std::vector<double> out(dim, 0.0);
    for (std::size_t r = 0; r < dim; ++r) {
        double acc = b.data[r];
        const double* row = w.data.data() + r * dim;
        for (std::size_t c = 0; c < dim; ++c) acc += row[c] * mean[c];
        out[r] = std::tanh(acc);
    }
    return EmbeddingVector(std::move(out));
}

} // namespace medfinder
