#include "medfinder/losses.hpp"

#include <algorithm>
#include <cmath>

#include "medfinder/common.hpp"

namespace medfinder {

double mse_loss(const TokenMatrix& z1, const TokenMatrix& z2) {
    if (z1.rows() != z2.rows() || z1.cols() != z2.cols())
        throw DataError("mse_loss: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < z1.data().size(); ++i) {
        const double d = z1.data()[i] - z2.data()[i];
        acc += d * d;
    }
    return 0.5 * acc;
}

namespace {

// Cross-entropy of the diagonal entry within one softmax-normalized slice.
double slice_cross_entropy(const std::vector<double>& logits, std::size_t positive) {
    const double max_logit = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - max_logit);
    return -(logits[positive] - max_logit) + std::log(z);
}

} // namespace

double sim_loss(const Matrix& scores, double tau, bool symmetric) {
    const std::size_t n = scores.rows();
    if (n < 2 || scores.cols() != n)
        throw DataError("sim_loss: needs a square score matrix with n >= 2");
    if (!(tau > 0.0)) throw DataError("sim_loss: tau must be positive");
    for (double v : scores.data())
        if (!std::isfinite(v)) throw NumericError("sim_loss: non-finite score");

    double loss = 0.0;
    std::vector<double> logits(n);
    for (std::size_t i = 0; i < n; ++i) { // per image column, softmax over texts
        for (std::size_t k = 0; k < n; ++k) logits[k] = scores.at(k, i) / tau;
        loss += slice_cross_entropy(logits, i);
    }
    if (symmetric) {
        for (std::size_t i = 0; i < n; ++i) { // per text row, softmax over images
            for (std::size_t j = 0; j < n; ++j) logits[j] = scores.at(i, j) / tau;
            loss += slice_cross_entropy(logits, i);
        }
    }
    return loss;
}

double total_loss(const LossBreakdown& parts) {
    if (!(parts.alpha > 0.0)) throw DataError("total_loss: alpha must be positive");
    return parts.l_mse + parts.alpha * parts.l_sim;
}

} // namespace medfinder
