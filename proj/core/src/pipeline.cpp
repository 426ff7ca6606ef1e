#include "medfinder/pipeline.hpp"

#include <cstring>
#include <fstream>

#include "medfinder/common.hpp"
#include "medfinder/fusion.hpp"
#include "medfinder/vision.hpp"
#include "medfinder/volume.hpp"

namespace medfinder {

EmbeddingVector embed_volume(const Volume& raw, const EncoderParams& params,
                             const ModelConfig& model,
                             const std::array<std::size_t, 3>& target_dims) {
    const VisionEncoder encoder(params, model);
    const Volume resized =
        resize_trilinear(imputed(raw), target_dims[0], target_dims[1], target_dims[2]);
    const TokenMatrix tokens = encoder.encode(resized).tokens;
    // Identity augmentation at evaluation time: both views equal the encoded
    // volume, so fusion sees the same matrix twice.
    return pool_tokens(cross_attention(tokens, tokens));
}

EmbeddingVector embed_text(const std::string& text, const Vocabulary& vocab,
                           const EncoderParams& params, const ModelConfig& model,
                           std::size_t sample_length) {
    const TextEncoder encoder(params, model);
    return encoder.encode(truncate_text(tokenize(text, vocab), sample_length));
}

EmbeddedCorpus embed_split(const Manifest& manifest, Split split,
                           const std::filesystem::path& volumes_root,
                           const Vocabulary& vocab, const EncoderParams& params,
                           const ModelConfig& model,
                           const std::array<std::size_t, 3>& target_dims,
                           std::size_t sample_length) {
    EmbeddedCorpus out;
    for (const PairedSample& s : manifest.samples) {
        if (s.split != split) continue;
        out.ids.push_back(s.id);
        out.text.push_back(embed_text(s.report.text, vocab, params, model, sample_length));
        const Volume raw = load_volume(volumes_root / s.volume.data_path);
        out.image.push_back(embed_volume(raw, params, model, target_dims));
        if (!s.keywords.empty()) out.labels[s.id] = s.keywords;
    }
    if (out.ids.empty())
        throw DataError("no samples in split '" + split_name(split) + "'");
    return out;
}

MetricsReport evaluate_split(const Manifest& manifest, Split split,
                             const std::filesystem::path& volumes_root,
                             const Vocabulary& vocab, const EncoderParams& params,
                             const ModelConfig& model,
                             const std::array<std::size_t, 3>& target_dims,
                             std::size_t sample_length, const EvalOptions& options) {
    const EmbeddedCorpus corpus = embed_split(manifest, split, volumes_root, vocab, params,
                                              model, target_dims, sample_length);
    std::set<std::string> keywords;
    for (const auto& [id, labels] : corpus.labels) keywords.insert(labels.begin(), labels.end());
    std::map<std::string, EmbeddingVector> keyword_queries;
    for (const std::string& keyword : keywords)
        keyword_queries.emplace(keyword,
                                embed_text(keyword, vocab, params, model, sample_length));
    return evaluate_embeddings(corpus.ids, corpus.text, corpus.image, corpus.labels,
                               keyword_queries, options);
}

std::vector<TrainItem> load_train_items(const Manifest& manifest, Split split,
                                        const std::filesystem::path& volumes_root,
                                        const Vocabulary& vocab,
                                        const std::array<std::size_t, 3>& target_dims) {
    std::vector<TrainItem> items;
    for (const PairedSample& s : manifest.samples) {
        if (s.split != split) continue;
        TrainItem item;
        item.id = s.id;
        item.tokens = tokenize(s.report.text, vocab);
        const Volume raw = load_volume(volumes_root / s.volume.data_path);
        item.volume =
            resize_trilinear(imputed(raw), target_dims[0], target_dims[1], target_dims[2]);
        items.push_back(std::move(item));
    }
    if (items.empty()) throw DataError("no samples in split '" + split_name(split) + "'");
    return items;
}

namespace {

constexpr char kEmbMagic[8] = {'M', 'F', 'E', 'M', 'B', '0', '0', '1'};

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

} // namespace

void save_embeddings(const std::filesystem::path& path, const std::vector<std::string>& ids,
                     const std::vector<EmbeddingVector>& vectors) {
    if (ids.size() != vectors.size()) throw DataError("save_embeddings: ids/vectors mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write embeddings: " + path.string());
    out.write(kEmbMagic, sizeof(kEmbMagic));
    write_u64(out, ids.size());
    write_u64(out, vectors.empty() ? 0 : vectors[0].dim());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        write_u32(out, static_cast<std::uint32_t>(ids[i].size()));
        out.write(ids[i].data(), static_cast<std::streamsize>(ids[i].size()));
        for (double v : vectors[i].values()) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            write_u64(out, bits);
        }
    }
    if (!out) throw DataError("short write on embeddings: " + path.string());
}

std::pair<std::vector<std::string>, std::vector<EmbeddingVector>> load_embeddings(
    const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open embeddings: " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kEmbMagic, 8) != 0)
        throw DataError("not an embeddings file: " + path.string());
    const std::uint64_t count = read_u64(in);
    const std::uint64_t dim = read_u64(in);
    std::vector<std::string> ids;
    std::vector<EmbeddingVector> vectors;
    ids.reserve(count);
    vectors.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint32_t len = read_u32(in);
        std::string id(len, '\0');
        in.read(id.data(), len);
        std::vector<double> values(dim);
        for (std::uint64_t d = 0; d < dim; ++d) {
            const std::uint64_t bits = read_u64(in);
            double v;
            std::memcpy(&v, &bits, 8);
            values[d] = v;
        }
        if (!in) throw DataError("truncated embeddings file: " + path.string());
        ids.push_back(std::move(id));
        vectors.emplace_back(std::move(values));
    }
    return {std::move(ids), std::move(vectors)};
}

} // namespace medfinder
