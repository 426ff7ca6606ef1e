#include "medfinder/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "medfinder/common.hpp"
#include "medfinder/fusion.hpp"

namespace medfinder {

namespace {

using ordered_json = nlohmann::ordered_json;

bool better(const ScoredId& a, const ScoredId& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
}

} // namespace

void RetrievalIndex::add(std::string id, EmbeddingVector embedding) {
    if (finalized_) throw DataError("index is immutable after finalize");
    if (vectors_.empty()) {
        dim_ = embedding.dim();
    } else if (embedding.dim() != dim_) {
        throw DataError("index dimension mismatch for id " + id);
    }
    ids_.push_back(std::move(id));
    vectors_.push_back(std::move(embedding));
}

void RetrievalIndex::finalize() {
    std::vector<std::size_t> order(ids_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return ids_[a] < ids_[b]; });
    std::vector<std::string> ids;
    std::vector<EmbeddingVector> vectors;
    ids.reserve(ids_.size());
    vectors.reserve(vectors_.size());
    for (std::size_t i : order) {
        if (!ids.empty() && ids.back() == ids_[i])
            throw DataError("duplicate id in index: " + ids_[i]);
        ids.push_back(std::move(ids_[i]));
        vectors.push_back(std::move(vectors_[i]));
    }
    ids_ = std::move(ids);
    vectors_ = std::move(vectors);
    finalized_ = true;
}

RankedResult top_k(const RetrievalIndex& index, const EmbeddingVector& query, std::size_t k) {
    if (index.size() == 0) throw DataError("top_k on an empty index");
    if (k < 1) throw DataError("top_k needs k >= 1");
    RankedResult all;
    all.reserve(index.size());
    for (std::size_t i = 0; i < index.size(); ++i)
        all.push_back({index.id_at(i), cosine_score(query, index.vector_at(i))});
    std::sort(all.begin(), all.end(), better);
    if (all.size() > k) all.resize(k);
    return all;
}

std::size_t rank_of(const RetrievalIndex& index, const EmbeddingVector& query,
                    const std::string& target_id) {
    if (index.size() == 0) throw DataError("rank_of on an empty index");
    ScoredId target{target_id, 0.0};
    bool found = false;
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index.id_at(i) == target_id) {
            target.score = cosine_score(query, index.vector_at(i));
            found = true;
            break;
        }
    }
    if (!found) throw DataError("rank_of: target id not in index: " + target_id);

    std::size_t ahead = 0;
    for (std::size_t i = 0; i < index.size(); ++i) {
        const ScoredId entry{index.id_at(i), cosine_score(query, index.vector_at(i))};
        if (entry.id != target_id && better(entry, target)) ++ahead;
    }
    return ahead + 1;
}

RankSummary recall_mdr_mnr(const std::vector<std::size_t>& ranks) {
    if (ranks.empty()) throw DataError("recall_mdr_mnr: empty rank list");
    RankSummary s;
    std::vector<std::size_t> sorted = ranks;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() < 1) throw DataError("recall_mdr_mnr: ranks are 1-based");
    const double n = static_cast<double>(ranks.size());
    double sum = 0.0;
    std::size_t r1 = 0, r5 = 0, r10 = 0;
    for (std::size_t r : sorted) {
        sum += static_cast<double>(r);
        if (r <= 1) ++r1;
        if (r <= 5) ++r5;
        if (r <= 10) ++r10;
    }
    s.r1 = static_cast<double>(r1) / n;
    s.r5 = static_cast<double>(r5) / n;
    s.r10 = static_cast<double>(r10) / n;
    const std::size_t m = sorted.size();
    s.mdr = static_cast<double>(m % 2 == 1 ? sorted[m / 2] : sorted[m / 2 - 1]);
    s.mnr = sum / n;
    return s;
}

double precision_at_k(const RankedResult& result, const std::string& keyword,
                      const std::map<std::string, std::set<std::string>>& labels,
                      std::size_t k) {
    if (k < 1 || k > result.size())
        throw DataError("precision_at_k: k must be in [1, result size]");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < k; ++i) {
        auto it = labels.find(result[i].id);
        if (it != labels.end() && it->second.count(keyword)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(k);
}

MetricsReport evaluate_embeddings(
    const std::vector<std::string>& ids, const std::vector<EmbeddingVector>& text_embeddings,
    const std::vector<EmbeddingVector>& image_embeddings,
    const std::map<std::string, std::set<std::string>>& labels,
    const std::map<std::string, EmbeddingVector>& keyword_queries, const EvalOptions& options) {
    const std::size_t n = ids.size();
    if (n == 0) throw DataError("evaluate: empty test set");
    if (text_embeddings.size() != n || image_embeddings.size() != n)
        throw DataError("evaluate: ids and embeddings must align");

    RetrievalIndex image_index, text_index;
    for (std::size_t i = 0; i < n; ++i) {
        image_index.add(ids[i], image_embeddings[i]);
        text_index.add(ids[i], text_embeddings[i]);
    }
    image_index.finalize();
    text_index.finalize();

    MetricsReport report;
    std::vector<std::size_t> t2i_ranks(n), i2t_ranks(n);
    for (std::size_t i = 0; i < n; ++i) {
        t2i_ranks[i] = rank_of(image_index, text_embeddings[i], ids[i]);
        i2t_ranks[i] = rank_of(text_index, image_embeddings[i], ids[i]);
    }
    report.text_to_image = recall_mdr_mnr(t2i_ranks);
    report.image_to_text = recall_mdr_mnr(i2t_ranks);

    if (!keyword_queries.empty()) {
        // Candidate pool: the labeled subset unless configured to search all.
        RetrievalIndex pool;
        std::size_t pool_size = 0;
        for (std::size_t i = 0; i < n; ++i) {
            auto it = labels.find(ids[i]);
            const bool labeled = it != labels.end() && !it->second.empty();
            if (options.keyword_pool_all || labeled) {
                pool.add(ids[i], image_embeddings[i]);
                ++pool_size;
            }
        }
        if (pool_size > 0) {
            pool.finalize();
            for (const auto& [keyword, query] : keyword_queries) {
                std::map<std::size_t, double> per_k;
                for (std::size_t k : options.precision_ks) {
                    if (k > pool_size) continue;
                    const RankedResult result = top_k(pool, query, k);
                    per_k[k] = precision_at_k(result, keyword, labels, k);
                }
                report.keyword_precision[keyword] = std::move(per_k);
            }
        }
    }
    return report;
}

std::string metrics_to_json(const MetricsReport& report) {
    auto direction = [](const RankSummary& s) {
        return ordered_json{{"r1", s.r1}, {"r5", s.r5}, {"r10", s.r10},
                            {"mdr", s.mdr}, {"mnr", s.mnr}};
    };
    ordered_json j;
    j["text_to_image"] = direction(report.text_to_image);
    j["image_to_text"] = direction(report.image_to_text);
    ordered_json kw = ordered_json::object();
    for (const auto& [keyword, per_k] : report.keyword_precision) {
        ordered_json entry = ordered_json::object();
        for (const auto& [k, p] : per_k) entry["p" + std::to_string(k)] = p;
        kw[keyword] = std::move(entry);
    }
    j["keyword_precision"] = std::move(kw);
    return j.dump(2);
}

std::string metrics_to_table(const MetricsReport& report) {
    std::ostringstream out;
    char line[160];
    out << "Direction        R@1     R@5     R@10    MdR     MnR\n";
    auto row = [&](const char* name, const RankSummary& s) {
        std::snprintf(line, sizeof(line), "%-15s %-7.4f %-7.4f %-7.4f %-7.1f %-7.2f\n",
                      name, s.r1, s.r5, s.r10, s.mdr, s.mnr);
        out << line;
    };
    row("text-to-image", report.text_to_image);
    row("image-to-text", report.image_to_text);
    if (!report.keyword_precision.empty()) {
        out << "\nKeyword";
        std::set<std::size_t> ks;
        for (const auto& [keyword, per_k] : report.keyword_precision)
            for (const auto& [k, p] : per_k) ks.insert(k);
        for (std::size_t k : ks) out << "  P@" << k;
        out << '\n';
        for (const auto& [keyword, per_k] : report.keyword_precision) {
            out << keyword;
            for (std::size_t k : ks) {
                auto it = per_k.find(k);
                if (it == per_k.end()) {
                    out << "  -";
                } else {
                    std::snprintf(line, sizeof(line), "  %.4f", it->second);
                    out << line;
                }
            }
            out << '\n';
        }
    }
    return out.str();
}

} // namespace medfinder
