#pragma once

#include <cstddef>
#include <vector>

namespace mmu {

/// Dense row-major matrix. Sized for this project's problems: a handful of
/// columns (sensor channels) and row counts in the hundreds.
class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double* row_ptr(std::size_t i) { return data_.data() + i * cols_; }
    const double* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

Mat mul(const Mat& a, const Mat& b);
Mat transposed(const Mat& a);

/// a's columns restricted to the given index list, in the given order.
Mat select_columns(const Mat& a, const std::vector<std::size_t>& idx);

struct SymEig {
    std::vector<double> values;  // descending
    Mat vectors;                 // column j is the eigenvector of values[j]
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Deterministic:
/// eigenvalues sorted descending; each eigenvector is oriented so its
/// largest-magnitude entry (first such on ties) is positive.
SymEig eig_symmetric(const Mat& a);

}  // namespace mmu
