// AVX2+FMA kernel variants. Built with per-function target attributes so the
// rest of the project needs no special compile flags; only ever called after
// a runtime CPU check.

#if defined(__x86_64__)

#include <immintrin.h>

#include <cmath>
#include <cstddef>

#define MMU_AVX2 __attribute__((target("avx2,fma")))

namespace mmu::kernels::avx2 {

namespace {

MMU_AVX2 inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

}  // namespace

MMU_AVX2 void dual_dot(const double* x, const double* c, const double* s,
                       std::size_t n, double& dc, double& ds) {
    __m256d acc_c0 = _mm256_setzero_pd();
    __m256d acc_c1 = _mm256_setzero_pd();
    __m256d acc_s0 = _mm256_setzero_pd();
    __m256d acc_s1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256d xa = _mm256_loadu_pd(x + i);
        __m256d xb = _mm256_loadu_pd(x + i + 4);
        acc_c0 = _mm256_fmadd_pd(xa, _mm256_loadu_pd(c + i), acc_c0);
        acc_c1 = _mm256_fmadd_pd(xb, _mm256_loadu_pd(c + i + 4), acc_c1);
        acc_s0 = _mm256_fmadd_pd(xa, _mm256_loadu_pd(s + i), acc_s0);
        acc_s1 = _mm256_fmadd_pd(xb, _mm256_loadu_pd(s + i + 4), acc_s1);
    }
    for (; i + 4 <= n; i += 4) {
        __m256d xa = _mm256_loadu_pd(x + i);
        acc_c0 = _mm256_fmadd_pd(xa, _mm256_loadu_pd(c + i), acc_c0);
        acc_s0 = _mm256_fmadd_pd(xa, _mm256_loadu_pd(s + i), acc_s0);
    }
    double ac = hsum(_mm256_add_pd(acc_c0, acc_c1));
    double as = hsum(_mm256_add_pd(acc_s0, acc_s1));
    for (; i < n; ++i) {
        ac += x[i] * c[i];
        as += x[i] * s[i];
    }
    dc = ac;
    ds = as;
}

MMU_AVX2 void modulated_cosine(double* dst, std::size_t n, double a0, double da,
                               double b0, double db, double ph0, double dph) {
    // Lane decomposition: cos(phb + l*dph) = cos(phb)cos(l*dph) - sin(phb)sin(l*dph)
    // with phb advanced four samples at a time by plane rotation, re-anchored to
    // libm periodically to stop the rotation error from accumulating.
    const __m256d lane_cos = _mm256_set_pd(std::cos(3 * dph), std::cos(2 * dph),
                                           std::cos(dph), 1.0);
    const __m256d lane_sin = _mm256_set_pd(std::sin(3 * dph), std::sin(2 * dph),
                                           std::sin(dph), 0.0);
    const double rot_c = std::cos(4 * dph);
    const double rot_s = std::sin(4 * dph);
    const __m256d va0 = _mm256_set1_pd(a0);
    const __m256d vda = _mm256_set1_pd(da);
    const __m256d vb0 = _mm256_set1_pd(b0);
    const __m256d vdb = _mm256_set1_pd(db);
    __m256d vidx = _mm256_set_pd(3.0, 2.0, 1.0, 0.0);
    const __m256d vfour = _mm256_set1_pd(4.0);

    constexpr std::size_t kResync = 256;  // blocks between libm re-anchors
    double cb = 0.0, sb = 0.0;
    std::size_t block = 0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4, ++block) {
        if (block % kResync == 0) {
            const double phb = ph0 + static_cast<double>(i) * dph;
            cb = std::cos(phb);
            sb = std::sin(phb);
        }
        __m256d vcos = _mm256_fnmadd_pd(_mm256_set1_pd(sb), lane_sin,
                                        _mm256_mul_pd(_mm256_set1_pd(cb), lane_cos));
        __m256d amp_a = _mm256_fmadd_pd(vidx, vda, va0);
        __m256d amp_b = _mm256_fmadd_pd(vidx, vdb, vb0);
        _mm256_storeu_pd(dst + i, _mm256_mul_pd(_mm256_mul_pd(amp_a, amp_b), vcos));
        vidx = _mm256_add_pd(vidx, vfour);
        const double cb2 = cb * rot_c - sb * rot_s;
        sb = sb * rot_c + cb * rot_s;
        cb = cb2;
    }
    for (; i < n; ++i) {
        const double fi = static_cast<double>(i);
        dst[i] = (a0 + fi * da) * (b0 + fi * db) * std::cos(ph0 + fi * dph);
    }
}

MMU_AVX2 void add_inplace(double* dst, const double* src, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(dst + i, _mm256_add_pd(_mm256_loadu_pd(dst + i),
                                                _mm256_loadu_pd(src + i)));
    }
    for (; i < n; ++i) dst[i] += src[i];
}

}  // namespace mmu::kernels::avx2

#endif  // __x86_64__
