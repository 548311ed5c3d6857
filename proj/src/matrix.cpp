#include "mstream/matrix.hpp"

#include <algorithm>
#include <string>

#include "mstream/errors.hpp"

namespace mstream {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        throw DimensionError("matrix data has " + std::to_string(data_.size()) + " entries, expected " +
                             std::to_string(rows * cols));
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m;
    m.rows_ = n;
    m.cols_ = n;
    m.identity_ = true;
    return m;
}

double Matrix::operator()(std::size_t r, std::size_t c) const {
    if (identity_) return r == c ? 1.0 : 0.0;
    return data_[r * cols_ + c];
}

std::vector<double> Matrix::dense() const {
    if (!identity_) return data_;
    std::vector<double> out(rows_ * cols_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) out[i * cols_ + i] = 1.0;
    return out;
}

void Matrix::apply(std::span<const double> x, std::span<double> out) const {
    if (x.size() != cols_ || out.size() != rows_) throw DimensionError("matrix apply: size mismatch");
    if (identity_) {
        std::copy(x.begin(), x.end(), out.begin());
        return;
    }
    const double* row = data_.data();
    for (std::size_t r = 0; r < rows_; ++r, row += cols_) {
        double acc = 0.0;
        for (std::size_t c = 0; c < cols_; ++c) acc += row[c] * x[c];
        out[r] = acc;
    }
}

void Matrix::apply_add(std::span<const double> x, std::span<double> out, double scale) const {
    if (x.size() != cols_ || out.size() != rows_) throw DimensionError("matrix apply: size mismatch");
    if (identity_) {
        for (std::size_t i = 0; i < rows_; ++i) out[i] += scale * x[i];
        return;
    }
    const double* row = data_.data();
    for (std::size_t r = 0; r < rows_; ++r, row += cols_) {
        double acc = 0.0;
        for (std::size_t c = 0; c < cols_; ++c) acc += row[c] * x[c];
        out[r] += scale * acc;
    }
}

Matrix Matrix::transposed() const {
    if (identity_) return *this;
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = data_[r * cols_ + c];
    }
    return t;
}

bool Matrix::is_zero() const noexcept {
    if (identity_) return rows_ == 0;
    return std::all_of(data_.begin(), data_.end(), [](double v) { return v == 0.0; });
}

}  // namespace mstream
