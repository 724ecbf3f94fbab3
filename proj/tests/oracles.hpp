#pragma once

// Test-only oracles, kept independent of the library's implementation paths:
// full-length DFT for lock-in checks, closed-form characteristic-polynomial
// eigensolvers for n=2,3, Gram-Schmidt projection, and quadrature-based
// normal / chi-square distribution functions.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace oracle {

inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double gauss(std::mt19937_64& rng) {
    const double u1 = 1.0 - uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Amplitude/phase of the bin at frequency f via a full-length DFT in long
// double, phase referenced to the window start.
struct BinResult {
    double amplitude;
    double phase;
};

inline BinResult dft_bin(std::span<const double> x, double fs, double f) {
    const std::size_t n = x.size();
    const long double k = std::roundl(static_cast<long double>(f) * n / fs);
    std::complex<long double> acc{0.0L, 0.0L};
    for (std::size_t j = 0; j < n; ++j) {
        const long double ang = -2.0L * M_PIl * k * j / n;
        acc += static_cast<long double>(x[j]) *
               std::complex<long double>(std::cos(ang), std::sin(ang));
    }
    const long double amp = 2.0L * std::abs(acc) / n;
    return {static_cast<double>(amp), static_cast<double>(std::arg(acc))};
}

// Eigenvalues (descending) and eigenvectors of a symmetric 2x2 from the
// quadratic characteristic polynomial.
struct Eig2 {
    double values[2];
    double vectors[2][2];  // vectors[i] is the eigenvector of values[i]
};

inline Eig2 eig2(double a, double b, double d) {
    const double tr = a + d;
    const double disc = std::sqrt((a - d) * (a - d) + 4.0 * b * b);
    Eig2 out;
    out.values[0] = 0.5 * (tr + disc);
    out.values[1] = 0.5 * (tr - disc);
    for (int i = 0; i < 2; ++i) {
        const double l = out.values[i];
        // rows of (A - l I) are parallel; eigenvector is orthogonal to them
        double v0 = b, v1 = l - a;
        const double alt0 = l - d, alt1 = b;
        if (std::hypot(alt0, alt1) > std::hypot(v0, v1)) {
            v0 = alt0;
            v1 = alt1;
        }
        const double norm = std::hypot(v0, v1);
        out.vectors[i][0] = v0 / norm;
        out.vectors[i][1] = v1 / norm;
    }
    return out;
}

// Trigonometric solution of the cubic characteristic polynomial of a
// symmetric 3x3; eigenvectors from cross products of rows of (A - l I).
struct Eig3 {
    double values[3];
    double vectors[3][3];
};

inline Eig3 eig3(const double a[3][3]) {
    const double q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    const double p1 = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
    const double p2 = (a[0][0] - q) * (a[0][0] - q) + (a[1][1] - q) * (a[1][1] - q) +
                      (a[2][2] - q) * (a[2][2] - q) + 2.0 * p1;
    const double p = std::sqrt(p2 / 6.0);
    double b[3][3];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) b[i][j] = (a[i][j] - (i == j ? q : 0.0)) / p;
    const double detb =
        b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) -
        b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0]) +
        b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    const double r = std::clamp(detb / 2.0, -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;

    Eig3 out;
    out.values[0] = q + 2.0 * p * std::cos(phi);
    out.values[2] = q + 2.0 * p * std::cos(phi + 2.0 * M_PI / 3.0);
    out.values[1] = 3.0 * q - out.values[0] - out.values[2];

    for (int i = 0; i < 3; ++i) {
        const double l = out.values[i];
        double m[3][3];
        for (int r1 = 0; r1 < 3; ++r1)
            for (int c = 0; c < 3; ++c) m[r1][c] = a[r1][c] - (r1 == c ? l : 0.0);
        double best[3] = {0, 0, 0};
        double best_norm = -1.0;
        const int pairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
        for (const auto& pr : pairs) {
            const double* u = m[pr[0]];
            const double* w = m[pr[1]];
            const double cx = u[1] * w[2] - u[2] * w[1];
            const double cy = u[2] * w[0] - u[0] * w[2];
            const double cz = u[0] * w[1] - u[1] * w[0];
            const double norm = std::sqrt(cx * cx + cy * cy + cz * cz);
            if (norm > best_norm) {
                best_norm = norm;
                best[0] = cx;
                best[1] = cy;
                best[2] = cz;
            }
        }
        for (int c = 0; c < 3; ++c) out.vectors[i][c] = best[c] / best_norm;
    }
    return out;
}

// x minus its projection onto span(p_1..p_m), with the basis re-orthonormalized
// by classic Gram-Schmidt first.
inline std::vector<double> gs_residual(std::span<const double> x,
                                       const std::vector<std::vector<double>>& basis) {
    std::vector<std::vector<double>> ortho;
    for (const auto& b : basis) {
        std::vector<double> u(b.begin(), b.end());
        for (const auto& o : ortho) {
            double dot = 0.0;
            for (std::size_t i = 0; i < u.size(); ++i) dot += u[i] * o[i];
            for (std::size_t i = 0; i < u.size(); ++i) u[i] -= dot * o[i];
        }
        double norm = 0.0;
        for (double v : u) norm += v * v;
        norm = std::sqrt(norm);
        for (double& v : u) v /= norm;
        ortho.push_back(std::move(u));
    }
    std::vector<double> r(x.begin(), x.end());
    for (const auto& o : ortho) {
        double dot = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) dot += x[i] * o[i];
        for (std::size_t i = 0; i < r.size(); ++i) r[i] -= dot * o[i];
    }
    return r;
}

// Adaptive Simpson integration.
inline double simpson(double (*f)(double), double a, double b, double fa, double fb,
                      double fm, double eps, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * eps)
        return left + right + (left + right - whole) / 15.0;
    return simpson(f, a, m, fa, fm, flm, eps / 2.0, depth - 1) +
           simpson(f, m, b, fm, fb, frm, eps / 2.0, depth - 1);
}

inline double integrate(double (*f)(double), double a, double b, double eps) {
    const double m = 0.5 * (a + b);
    return simpson(f, a, b, f(a), f(b), f(m), eps, 48);
}

inline double normal_pdf(double t) {
    return std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI);
}

/// Standard normal CDF by quadrature of the density.
inline double phi_quadrature(double x) {
    if (x < 0.0) return 1.0 - phi_quadrature(-x);
    return 0.5 + integrate(&normal_pdf, 0.0, x, 1e-13);
}

/// Inverse of phi_quadrature by bisection.
inline double normal_quantile_quadrature(double alpha) {
    double lo = -9.0, hi = 9.0;
    for (int i = 0; i < 100; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (phi_quadrature(mid) < alpha) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

namespace detail {
inline double chi2_dof;
inline double chi2_integrand(double u) {
    // chi2 cdf with t = u^2 substitution: 2 u^{k-1} e^{-u^2/2} / (2^{k/2} Gamma(k/2))
    return 2.0 * std::pow(u, chi2_dof - 1.0) * std::exp(-0.5 * u * u);
}
}  // namespace detail

inline double chi2_cdf_quadrature(double dof, double x) {
    if (x <= 0.0) return 0.0;
    detail::chi2_dof = dof;
    const double norm = std::exp2(0.5 * dof) * std::exp(std::lgamma(0.5 * dof));
    return integrate(&detail::chi2_integrand, 0.0, std::sqrt(x), 1e-13) / norm;
}

inline double chi2_quantile_quadrature(double dof, double alpha) {
    double lo = 0.0, hi = dof + 10.0;
    while (chi2_cdf_quadrature(dof, hi) < alpha) hi *= 2.0;
    for (int i = 0; i < 100; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (chi2_cdf_quadrature(dof, mid) < alpha) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace oracle
