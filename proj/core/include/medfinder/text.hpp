#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "medfinder/matrix.hpp"
#include "medfinder/params.hpp"

namespace medfinder {

// Token -> dense index map. Index 0 is padding, index 1 is unknown;
// real tokens start at 2.
class Vocabulary {
public:
    static constexpr std::uint32_t kPadding = 0;
    static constexpr std::uint32_t kUnknown = 1;

    Vocabulary() = default;
    explicit Vocabulary(const std::vector<std::string>& tokens);

    // One token per line; line i (0-based) gets index i + 2.
    static Vocabulary load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    std::size_t size() const noexcept { return tokens_.size() + 2; } // includes reserved
    std::uint32_t index_of(const std::string& token) const noexcept;
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }

private:
    std::vector<std::string> tokens_;
    std::vector<std::size_t> sorted_; // indices into tokens_, sorted by token
};

struct TokenSequence {
    std::vector<std::uint32_t> indices;
    std::size_t original_length = 0;

    bool operator==(const TokenSequence&) const = default;
};

// Case-folds (ASCII) and splits on whitespace and punctuation; out-of-vocabulary
// words map to the unknown index.
TokenSequence tokenize(const std::string& text, const Vocabulary& vocab);

// Split/fold only, no vocabulary lookup. Shared by tokenize and vocab building.
std::vector<std::string> split_words(const std::string& text);

struct SamplerConfig {
    enum class Mode { contiguous, random_words, off };
    Mode mode = Mode::contiguous;
    std::size_t length = 100; // L, contiguous window
    std::size_t words = 64;   // M, random word count
};

SamplerConfig::Mode sampler_mode_from_name(const std::string& name);
std::string sampler_mode_name(SamplerConfig::Mode mode);

// Training-time text sampling. Contiguous mode picks a uniformly random
// window of length min(L, len); random_words picks M distinct positions
// without replacement, kept in original order. Mode `off` truncates to the
// first L tokens (the deterministic evaluation behavior).
TokenSequence sample_text(const TokenSequence& t, const SamplerConfig& cfg, std::uint64_t seed);

// Deterministic evaluation form: first min(L, len) tokens.
TokenSequence truncate_text(const TokenSequence& t, std::size_t length);

// Frozen-by-default toy text encoder: mean of embedding rows, one affine
// map, tanh. Stands in for a pretrained encoder behind the same interface.
class TextEncoder {
public:
    TextEncoder(const EncoderParams& params, const ModelConfig& cfg);

    // Empty sequences are treated as a single padding token.
    EmbeddingVector encode(const TokenSequence& t) const;

    std::size_t output_dim() const noexcept { return cfg_.embed_dim; }
    bool frozen() const; // true iff every text.* group is frozen

private:
    const EncoderParams& params_;
    ModelConfig cfg_;
};

} // namespace medfinder
