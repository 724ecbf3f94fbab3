#pragma once

#include <string>
#include <vector>

#include "mmu/mat.hpp"

namespace mmu {

enum class SignalKind { Amplitude, Phase };

std::string_view kind_name(SignalKind k);

/// Rule for choosing the principal-component count m from the eigenvalue
/// spectrum. SquaredEigenvalues is the default (variance ratio over squared
/// eigenvalues); Cumulative is the conventional cumulative-eigenvalue ratio.
enum class VarianceRule { SquaredEigenvalues, Cumulative };

struct DataMatrix {
    Mat values;  // L x n, rows = time points, columns = units
    SignalKind kind = SignalKind::Amplitude;
    std::vector<std::string> unit_ids;  // n column identities

    std::size_t rows() const { return values.rows(); }
    std::size_t cols() const { return values.cols(); }
    void validate() const;  // L >= 2, n >= 2, all finite

    DataMatrix select_units(const std::vector<std::size_t>& idx) const;
};

struct PcaModel {
    std::vector<double> mu;           // per-column training mean
    std::vector<double> sigma;        // per-column training std (sample, L-1)
    std::vector<double> eigenvalues;  // of the training correlation matrix, descending
    Mat v;                            // n x n orthonormal eigenvectors (columns)
    std::size_t m = 1;                // principal-component count, 1 <= m < n
    double kappa = 0.0;
    VarianceRule rule = VarianceRule::SquaredEigenvalues;
    SignalKind kind = SignalKind::Amplitude;
    std::vector<std::string> unit_ids;

    std::size_t dim() const { return mu.size(); }
    Mat principal() const;  // P: first m columns of v
    Mat residual() const;   // R: remaining n-m columns
};

struct FitOptions {
    VarianceRule rule = VarianceRule::SquaredEigenvalues;
    std::size_t max_components = 0;  // 0 = no cap; otherwise m = min(rule result, cap)
};

/// Train a model: per-column normalization, eigendecomposition of the
/// correlation matrix, component count by the variance-ratio rule.
PcaModel fit(const DataMatrix& s, double kappa, const FitOptions& opts = {});

/// Normalize test data with the TRAINING mean/std.
Mat normalize_test(const DataMatrix& x, const PcaModel& model);

struct Decomposition {
    Mat main;      // Xbar * P * P^T
    Mat residual;  // Xbar * R * R^T
};

Decomposition decompose(const Mat& xbar, const PcaModel& model);

void save_model(const PcaModel& model, const std::string& path);
PcaModel load_model(const std::string& path);

}  // namespace mmu
