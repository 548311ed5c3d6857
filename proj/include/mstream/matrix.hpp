#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mstream {

// Row-major dense matrix with a fixed left-to-right summation order, so
// products are reproducible bit-for-bit. `identity` matrices carry no storage
// and apply as an exact copy.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool is_identity() const noexcept { return identity_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const;

    // Materialized values (identity expands to a dense I).
    std::vector<double> dense() const;

    // out = this * x. out.size() == rows, x.size() == cols.
    void apply(std::span<const double> x, std::span<double> out) const;
    // out += scale * (this * x).
    void apply_add(std::span<const double> x, std::span<double> out, double scale = 1.0) const;

    Matrix transposed() const;
    bool is_zero() const noexcept;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    bool identity_ = false;
    std::vector<double> data_;
};

}  // namespace mstream
