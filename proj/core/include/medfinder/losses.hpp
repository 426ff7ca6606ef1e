#pragma once

#include "medfinder/matrix.hpp"

namespace medfinder {

// View-consistency loss between two same-shape token matrices:
// 0.5 * sum of squared entry differences.
double mse_loss(const TokenMatrix& z1, const TokenMatrix& z2);

// Contrastive loss over a batch score matrix with scores.at(k, i) =
// Score(W_k, Z_pooled_i). For each image column i the diagonal entry is the
// positive; the loss is the sum over columns of the softmax cross-entropy at
// temperature tau, max-stabilized. `symmetric` adds the text-direction term
// (row-wise softmax) on top.
double sim_loss(const Matrix& scores, double tau, bool symmetric = false);

struct LossBreakdown {
    double l_mse = 0.0;
    double l_sim = 0.0;
    double l_total = 0.0;
    double alpha = 1.0;
};

// l_mse + alpha * l_sim, exactly as typed.
double total_loss(const LossBreakdown& parts);

} // namespace medfinder
