#pragma once

#include <string>
#include <vector>

#include "mmu/mat.hpp"
#include "mmu/pca.hpp"

// Residual-space monitoring. Only the Q (squared prediction error) statistic
// is provided: error drifts project onto the residual subspace, so Q is the
// operative statistic; principal-subspace (T^2) monitoring is deliberately
// not part of this library.

namespace mmu {

struct QSeries {
    std::vector<double> values;  // Q per test row, >= 0
    double threshold = 0.0;      // Q_alpha
    double alpha = 0.0;
    std::string model_id;

    std::size_t exceed_count() const;
    double exceed_fraction() const;
};

/// Q_i = sum_j residual(i, j)^2.
std::vector<double> q_statistic(const Mat& residual);

struct QAlphaOptions {
    /// Use the h0 denominator exactly as printed in some sources (3*theta3^2)
    /// instead of the standard 3*theta2^2.
    bool h0_as_printed = false;
};

/// Control threshold for Q at confidence alpha from the model's residual
/// eigenvalue spectrum (Jackson-Mudholkar normal approximation). Falls back
/// to the matched-moments chi-square approximation g*chi2_{h,alpha} when
/// h0 <= 0, with a warning on stderr.
double q_alpha(const PcaModel& model, double alpha, const QAlphaOptions& opts = {});

/// One-sided standard normal quantile: Phi(c) = alpha to ~1e-12.
double normal_quantile(double alpha);

/// Chi-square quantile for (possibly fractional) dof > 0.
double chi2_quantile(double dof, double alpha);

/// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);

}  // namespace mmu
