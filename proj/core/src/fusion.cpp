#include "medfinder/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "medfinder/common.hpp"

namespace medfinder {

CrossAttentionTrace cross_attention_trace(const TokenMatrix& z1, const TokenMatrix& z2) {
    if (z1.cols() != z2.cols()) throw DataError("cross_attention: column dims differ");
    if (z1.rows() != z2.rows()) throw DataError("cross_attention: row counts differ");
    if (z1.rows() == 0) throw DataError("cross_attention: empty token matrix");

    const std::size_t n = z1.rows();
    const std::size_t dim = z1.cols();

    CrossAttentionTrace tr;
    tr.norm1.resize(n);
    tr.norm2.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        tr.norm1[i] = l2_norm(z1.row(i));
        tr.norm2[i] = l2_norm(z2.row(i));
    }

    if (n == 1) {
        // Scalar softmax is exactly 1; the literal equations reduce to Z1.
        tr.fusion = z1;
        tr.weights = Matrix(1, 1, 1.0);
        tr.context = z2;
        return tr;
    }

    const double inv_sqrt_dim = 1.0 / std::sqrt(static_cast<double>(dim));
    tr.weights = Matrix(n, n);
    tr.context = Matrix(n, dim);
    tr.fusion = TokenMatrix(n, dim);

    std::vector<double> logits(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double denom = tr.norm1[i] * tr.norm2[j];
            logits[j] = denom > 0.0 ? dot(z1.row(i), z2.row(j)) * inv_sqrt_dim / denom : 0.0;
        }
        const double max_logit = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            tr.weights.at(i, j) = std::exp(logits[j] - max_logit);
            z += tr.weights.at(i, j);
        }
        for (std::size_t j = 0; j < n; ++j) tr.weights.at(i, j) /= z;

        for (std::size_t d = 0; d < dim; ++d) {
            double ctx = 0.0;
            for (std::size_t j = 0; j < n; ++j) ctx += tr.weights.at(i, j) * z2.at(j, d);
            tr.context.at(i, d) = ctx;
            tr.fusion.at(i, d) = z1.at(i, d) * ctx;
        }
    }
    return tr;
}

TokenMatrix cross_attention(const TokenMatrix& z1, const TokenMatrix& z2) {
    return cross_attention_trace(z1, z2).fusion;
}

EmbeddingVector pool_tokens(const TokenMatrix& tokens) {
    if (tokens.rows() == 0) throw DataError("pool_tokens: empty token matrix");
    std::vector<double> mean(tokens.cols(), 0.0);
    for (std::size_t t = 0; t < tokens.rows(); ++t)
        for (std::size_t d = 0; d < tokens.cols(); ++d) mean[d] += tokens.at(t, d);
    const double inv = 1.0 / static_cast<double>(tokens.rows());
    for (double& v : mean) v *= inv;
    return EmbeddingVector(std::move(mean));
}

double cosine_score(const EmbeddingVector& a, const EmbeddingVector& b, bool* degenerate) {
    if (a.dim() != b.dim()) throw DataError("cosine_score: dimension mismatch");
    if (degenerate) *degenerate = false;
    if (a.norm() == 0.0 || b.norm() == 0.0) {
        if (degenerate) *degenerate = true;
        return 0.0;
    }
    return dot(a.values(), b.values()) / (a.norm() * b.norm());
}

} // namespace medfinder
