#include "mmu/spe.hpp"

#include <cmath>
#include <iostream>

#include "mmu/errors.hpp"

namespace mmu {

std::size_t QSeries::exceed_count() const {
    std::size_t c = 0;
    for (double q : values)
        if (q > threshold) ++c;
    return c;
}

double QSeries::exceed_fraction() const {
    if (values.empty()) return 0.0;
    return static_cast<double>(exceed_count()) / static_cast<double>(values.size());
}

std::vector<double> q_statistic(const Mat& residual) {
    std::vector<double> q(residual.rows());
    for (std::size_t i = 0; i < residual.rows(); ++i) {
        double s = 0.0;
        const double* row = residual.row_ptr(i);
        for (std::size_t j = 0; j < residual.cols(); ++j) s += row[j] * row[j];
        q[i] = s;
    }
    return q;
}

double normal_quantile(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) fail("normal_quantile: alpha must be in (0, 1)");
    auto phi = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
    double lo = -10.0, hi = 10.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (phi(mid) < alpha) lo = mid;
        else hi = mid;
        if (hi - lo < 1e-14) break;
    }
    return 0.5 * (lo + hi);
}

namespace {

double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 500; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_contfrac(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_p(double a, double x) {
    if (!(a > 0.0)) fail("gamma_p: a must be > 0");
    if (x < 0.0) fail("gamma_p: x must be >= 0");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return gamma_p_series(a, x);
    return 1.0 - gamma_q_contfrac(a, x);
}

double chi2_quantile(double dof, double alpha) {
    if (!(dof > 0.0)) fail("chi2_quantile: dof must be > 0");
    if (!(alpha > 0.0 && alpha < 1.0)) fail("chi2_quantile: alpha must be in (0, 1)");
    // cdf(x) = P(dof/2, x/2); bisect on an expanding bracket.
    double hi = dof + 10.0;
    while (gamma_p(dof / 2.0, hi / 2.0) < alpha) hi *= 2.0;
    double lo = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (gamma_p(dof / 2.0, mid / 2.0) < alpha) lo = mid;
        else hi = mid;
        if (hi - lo < 1e-12 * std::max(1.0, hi)) break;
    }
    return 0.5 * (lo + hi);
}

double q_alpha(const PcaModel& model, double alpha, const QAlphaOptions& opts) {
    if (!(alpha > 0.5 && alpha < 1.0)) fail("q_alpha: alpha must be in (0.5, 1)");
    const std::size_t n = model.dim();
    if (model.m >= n) fail("q_alpha: model has no residual subspace");

    double th1 = 0.0, th2 = 0.0, th3 = 0.0;
    for (std::size_t j = model.m; j < n; ++j) {
        const double l = model.eigenvalues[j];
        th1 += l;
        th2 += l * l;
        th3 += l * l * l;
    }
    if (!(th1 > 0.0))
        fail("q_alpha: residual eigenvalues are all zero (degenerate threshold)");

    const double denom = opts.h0_as_printed ? 3.0 * th3 * th3 : 3.0 * th2 * th2;
    const double h0 = 1.0 - 2.0 * th1 * th3 / denom;
    const double c = normal_quantile(alpha);
    if (h0 <= 0.0) {
        // Matched-moments chi-square approximation.
        const double g = th2 / th1;
        const double h = th1 * th1 / th2;
        std::cerr << "spe: h0 <= 0 for model " << kind_name(model.kind)
                  << "; using chi-square approximation threshold\n";
        return g * chi2_quantile(h, alpha);
    }
    const double inner =
        c * std::sqrt(2.0 * th2 * h0 * h0) / th1 + 1.0 + th2 * h0 * (h0 - 1.0) / (th1 * th1);
    if (inner <= 0.0) {
        const double g = th2 / th1;
        const double h = th1 * th1 / th2;
        std::cerr << "spe: degenerate threshold base for model " << kind_name(model.kind)
                  << "; using chi-square approximation threshold\n";
        return g * chi2_quantile(h, alpha);
    }
    return th1 * std::pow(inner, 1.0 / h0);
}

}  // namespace mmu
