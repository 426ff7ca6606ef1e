#include "medfinder/matrix.hpp"

#include <cmath>
#include <utility>

namespace medfinder {

EmbeddingVector::EmbeddingVector(std::vector<double> values)
    : values_(std::move(values)), norm_(l2_norm(values_)) {}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double l2_norm(std::span<const double> a) noexcept {
    return std::sqrt(dot(a, a));
}

} // namespace medfinder
