#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "medfinder/matrix.hpp"

namespace medfinder {

// Immutable exact-search index over embeddings of one dim. Entries are kept
// sorted by id; ranking is by descending cosine score with ascending-id
// tie-break, which makes every query deterministic.
class RetrievalIndex {
public:
    void add(std::string id, EmbeddingVector embedding);
    void finalize(); // sorts by id, rejects duplicates and dim mismatches

    std::size_t size() const noexcept { return ids_.size(); }
    std::size_t dim() const noexcept { return dim_; }
    const std::string& id_at(std::size_t i) const noexcept { return ids_[i]; }
    const EmbeddingVector& vector_at(std::size_t i) const noexcept { return vectors_[i]; }
    bool finalized() const noexcept { return finalized_; }

private:
    std::vector<std::string> ids_;
    std::vector<EmbeddingVector> vectors_;
    std::size_t dim_ = 0;
    bool finalized_ = false;
};

struct ScoredId {
    std::string id;
    double score;

    bool operator==(const ScoredId&) const = default;
};

using RankedResult = std::vector<ScoredId>;

// Exact top-k by brute force; returns all items when k exceeds the index size.
RankedResult top_k(const RetrievalIndex& index, const EmbeddingVector& query, std::size_t k);

// 1-based position of target_id under the same deterministic ordering.
std::size_t rank_of(const RetrievalIndex& index, const EmbeddingVector& query,
                    const std::string& target_id);

struct RankSummary {
    double r1 = 0.0;
    double r5 = 0.0;
    double r10 = 0.0;
    double mdr = 0.0; // median rank, lower-of-two convention
    double mnr = 0.0; // mean rank
};

RankSummary recall_mdr_mnr(const std::vector<std::size_t>& ranks);

// Fraction of the top-k result whose label set contains `keyword`.
double precision_at_k(const RankedResult& result, const std::string& keyword,
                      const std::map<std::string, std::set<std::string>>& labels,
                      std::size_t k);

struct MetricsReport {
    RankSummary text_to_image;
    RankSummary image_to_text;
    // keyword -> (K -> P@K); a K is present only when the candidate pool holds
    // at least K items.
    std::map<std::string, std::map<std::size_t, double>> keyword_precision;
};

std::string metrics_to_json(const MetricsReport& report);
std::string metrics_to_table(const MetricsReport& report);

struct EvalOptions {
    bool keyword_pool_all = false; // candidate pool: labeled subset (default) or all
    std::vector<std::size_t> precision_ks = {20, 50, 100};
};

// Metric core shared by the evaluation pipeline and tests: paired text/image
// embeddings (position i of each vector belongs to sample ids[i]), both
// retrieval directions, then keyword precision for every distinct label using
// the provided keyword query embeddings.
MetricsReport evaluate_embeddings(
    const std::vector<std::string>& ids, const std::vector<EmbeddingVector>& text_embeddings,
    const std::vector<EmbeddingVector>& image_embeddings,
    const std::map<std::string, std::set<std::string>>& labels,
    const std::map<std::string, EmbeddingVector>& keyword_queries, const EvalOptions& options);

} // namespace medfinder
