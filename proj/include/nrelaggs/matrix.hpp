#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "nrelaggs/errors.hpp"

namespace nrelaggs {

/// Dense row-major matrix. Zero rows is a valid shape (an empty relation keeps
/// its feature width).
template <typename T>
class Matrix {
public:
    using value_type = T;

    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, T fill = T{}) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<T> data) : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_) fail(ErrorCode::shape_mismatch, "matrix data size does not match its shape");
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    const T& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<T> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const T> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::span<T> flat() noexcept { return data_; }
    std::span<const T> flat() const noexcept { return data_; }
    const std::vector<T>& data() const noexcept { return data_; }

    void append_row(std::span<const T> values) {
        if (rows_ == 0 && data_.empty() && cols_ == 0) cols_ = values.size();
        if (values.size() != cols_) fail(ErrorCode::shape_mismatch, "appended row width differs from matrix width");
        data_.insert(data_.end(), values.begin(), values.end());
        ++rows_;
    }

    /// Appends all rows of `other`; widths must agree.
    void append_rows(const Matrix& other) {
        if (other.cols_ != cols_) fail(ErrorCode::shape_mismatch, "appended block width differs from matrix width");
        data_.insert(data_.end(), other.data_.begin(), other.data_.end());
        rows_ += other.rows_;
    }

    template <typename U>
    Matrix<U> cast() const {
        Matrix<U> out(rows_, cols_);
        std::transform(data_.begin(), data_.end(), out.flat().begin(), [](T v) { return static_cast<U>(v); });
        return out;
    }

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

using MatrixF = Matrix<float>;
using MatrixD = Matrix<double>;

/// Horizontal concatenation of blocks with equal row counts.
template <typename T>
Matrix<T> hconcat(std::span<const Matrix<T>* const> blocks) {
    if (blocks.empty()) return {};
    const std::size_t rows = blocks.front()->rows();
    std::size_t cols = 0;
    for (const auto* b : blocks) {
        if (b->rows() != rows) fail(ErrorCode::shape_mismatch, "hconcat blocks differ in row count");
        cols += b->cols();
    }
    Matrix<T> out(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        T* dst = out.row(r).data();
        for (const auto* b : blocks) dst = std::copy(b->row(r).begin(), b->row(r).end(), dst);
    }
    return out;
}

/// Splits `m` column-wise into blocks of the given widths.
template <typename T>
std::vector<Matrix<T>> hsplit(const Matrix<T>& m, std::span<const std::size_t> widths) {
    std::size_t total = 0;
    for (auto w : widths) total += w;
    if (total != m.cols()) fail(ErrorCode::shape_mismatch, "hsplit widths do not sum to matrix width");
    std::vector<Matrix<T>> out;
    out.reserve(widths.size());
    std::size_t offset = 0;
    for (auto w : widths) {
        Matrix<T> block(m.rows(), w);
        for (std::size_t r = 0; r < m.rows(); ++r)
            std::copy_n(m.row(r).begin() + static_cast<std::ptrdiff_t>(offset), w, block.row(r).begin());
        out.push_back(std::move(block));
        offset += w;
    }
    return out;
}

}  // namespace nrelaggs
