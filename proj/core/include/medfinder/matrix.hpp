#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace medfinder {

// Dense row-major matrix of doubles. Token matrices (rows = tokens,
// cols = feature dim) and score matrices both use this.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double& at(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double at(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    std::vector<double>& data() noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

using TokenMatrix = Matrix;

// Fixed-length real vector with its L2 norm cached at construction.
// Immutable afterwards, so the cache cannot go stale.
class EmbeddingVector {
public:
    EmbeddingVector() = default;
    explicit EmbeddingVector(std::vector<double> values);

    std::size_t dim() const noexcept { return values_.size(); }
    double norm() const noexcept { return norm_; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }
    const std::vector<double>& values() const noexcept { return values_; }

    bool operator==(const EmbeddingVector&) const = default;

private:
    std::vector<double> values_;
    double norm_ = 0.0;
};

double dot(std::span<const double> a, std::span<const double> b) noexcept;
double l2_norm(std::span<const double> a) noexcept;

} // namespace medfinder
