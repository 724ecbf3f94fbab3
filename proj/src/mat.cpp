#include "mmu/mat.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mmu/errors.hpp"

namespace mmu {

Mat mul(const Mat& a, const Mat& b) {
    if (a.cols() != b.rows()) fail("mat: incompatible shapes in mul");
    Mat out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* brow = b.row_ptr(k);
            double* orow = out.row_ptr(i);
            for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

Mat transposed(const Mat& a) {
    Mat out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

Mat select_columns(const Mat& a, const std::vector<std::size_t>& idx) {
    Mat out(a.rows(), idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) {
        if (idx[j] >= a.cols()) fail("mat: column index out of range");
        for (std::size_t i = 0; i < a.rows(); ++i) out(i, j) = a(i, idx[j]);
    }
    return out;
}

namespace {

double off_diagonal_sq(const Mat& a) {
    double s = 0.0;
    for (std::size_t p = 0; p < a.rows(); ++p)
        for (std::size_t q = p + 1; q < a.cols(); ++q) s += a(p, q) * a(p, q);
    return s;
}

}  // namespace

SymEig eig_symmetric(const Mat& input) {
    const std::size_t n = input.rows();
    if (n == 0 || input.cols() != n) fail("eig: matrix must be square and nonempty");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(input(i, j) - input(j, i)) >
                1e-10 * std::max(1.0, std::abs(input(i, j))))
                fail("eig: matrix is not symmetric");

    Mat a = input;
    Mat v(n, n);
    for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

    double diag_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) diag_sq += a(i, i) * a(i, i);
    const double stop = 1e-30 * std::max(diag_sq, 1e-300);

    for (int sweep = 0; sweep < 100 && off_diagonal_sq(a) > stop; ++sweep) {
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double sgn = theta < 0.0 ? -1.0 : 1.0;
                const double t = sgn / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                const double tau = s / (1.0 + c);

                const double app = a(p, p), aqq = a(q, q);
                a(p, p) = app - t * apq;
                a(q, q) = aqq + t * apq;
                a(p, q) = a(q, p) = 0.0;
                for (std::size_t r = 0; r < n; ++r) {
                    if (r != p && r != q) {
                        const double arp = a(r, p), arq = a(r, q);
                        a(r, p) = a(p, r) = arp - s * (arq + tau * arp);
                        a(r, q) = a(q, r) = arq + s * (arp - tau * arq);
                    }
                    const double vrp = v(r, p), vrq = v(r, q);
                    v(r, p) = vrp - s * (vrq + tau * vrp);
                    v(r, q) = vrq + s * (vrp - tau * vrq);
                }
            }
        }
    }

    // Sort descending; keep the permutation stable for equal eigenvalues.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

    SymEig out;
    out.values.resize(n);
    out.vectors = Mat(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t src = order[j];
        out.values[j] = a(src, src);
        std::size_t imax = 0;
        double vmax = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (std::abs(v(i, src)) > vmax) {
                vmax = std::abs(v(i, src));
                imax = i;
            }
        }
        const double flip = v(imax, src) < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = flip * v(i, src);
    }
    return out;
}

}  // namespace mmu
