#pragma once

#include <vector>

#include "medfinder/matrix.hpp"

namespace medfinder {

// Cross-attention forward pass with the intermediates the backward pass needs.
struct CrossAttentionTrace {
    TokenMatrix fusion;         // Z1 gated row-wise by the attended context
    Matrix weights;             // row-stochastic attention (rows sum to 1)
    Matrix context;             // weights * Z2, per row
    std::vector<double> norm1;  // row norms of Z1
    std::vector<double> norm2;  // row norms of Z2
};

// Fuses two same-shape token matrices. Per row i the scalar affinity to row j
// is (Z1_i . Z2_j) / (sqrt(dim) * |Z1_i| * |Z2_j|), softmax-normalized over j;
// the fused row is Z1_i * context_i element-wise. A zero-norm row gets uniform
// weights. With a single token the scalar softmax is 1 and the literal
// formula collapses to the identity, so the result is Z1 bitwise.
CrossAttentionTrace cross_attention_trace(const TokenMatrix& z1, const TokenMatrix& z2);
TokenMatrix cross_attention(const TokenMatrix& z1, const TokenMatrix& z2);

// Mean over token rows -> fixed-length vector of the token dim.
EmbeddingVector pool_tokens(const TokenMatrix& tokens);

// Cosine similarity in [-1, 1]. A zero vector on either side yields 0 and
// sets *degenerate when provided.
double cosine_score(const EmbeddingVector& a, const EmbeddingVector& b,
                    bool* degenerate = nullptr);

} // namespace medfinder
