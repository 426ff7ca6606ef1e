#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "medfinder/corpus.hpp"
#include "medfinder/matrix.hpp"
#include "medfinder/params.hpp"
#include "medfinder/retrieval.hpp"
#include "medfinder/text.hpp"
#include "medfinder/training.hpp"
#include "medfinder/volume.hpp"

namespace medfinder {

struct EmbeddedCorpus {
    std::vector<std::string> ids; // manifest order (sorted by id)
    std::vector<EmbeddingVector> text;
    std::vector<EmbeddingVector> image;
    std::map<std::string, std::set<std::string>> labels; // only labeled samples
};

// Embeds every sample of `split` deterministically: volumes are loaded
// (missing voxels imputed to zero), resized to `target_dims`, and encoded
// with identity augmentation, so both views coincide; reports are truncated
// to the first `sample_length` tokens.
EmbeddedCorpus embed_split(const Manifest& manifest, Split split,
                           const std::filesystem::path& volumes_root,
                           const Vocabulary& vocab, const EncoderParams& params,
                           const ModelConfig& model,
                           const std::array<std::size_t, 3>& target_dims,
                           std::size_t sample_length);

// Embeds one volume / one text through the same deterministic path.
EmbeddingVector embed_volume(const Volume& raw, const EncoderParams& params,
                             const ModelConfig& model,
                             const std::array<std::size_t, 3>& target_dims);
EmbeddingVector embed_text(const std::string& text, const Vocabulary& vocab,
                           const EncoderParams& params, const ModelConfig& model,
                           std::size_t sample_length);

// Full evaluation protocol: embed the split, run both retrieval directions,
// then keyword precision with each distinct label encoded as a single-keyword
// text through the frozen text encoder.
MetricsReport evaluate_split(const Manifest& manifest, Split split,
                             const std::filesystem::path& volumes_root,
                             const Vocabulary& vocab, const EncoderParams& params,
                             const ModelConfig& model,
                             const std::array<std::size_t, 3>& target_dims,
                             std::size_t sample_length, const EvalOptions& options);

// Loads every sample of `split` as a training item: report tokenized in full,
// volume imputed and resized to target dims.
std::vector<TrainItem> load_train_items(const Manifest& manifest, Split split,
                                        const std::filesystem::path& volumes_root,
                                        const Vocabulary& vocab,
                                        const std::array<std::size_t, 3>& target_dims);

// Embedding cache: bytes "MFEMB001", u64 count, u64 dim, then per item
// u32 id length, id bytes, dim x little-endian float64.
void save_embeddings(const std::filesystem::path& path, const std::vector<std::string>& ids,
                     const std::vector<EmbeddingVector>& vectors);
std::pair<std::vector<std::string>, std::vector<EmbeddingVector>> load_embeddings(
    const std::filesystem::path& path);

} // namespace medfinder
