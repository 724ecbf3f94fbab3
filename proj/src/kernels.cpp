#include "mmu/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>

#include "mmu/errors.hpp"

namespace mmu::kernels {

namespace scalar {

void dual_dot(const double* x, const double* c, const double* s, std::size_t n,
              double& dc, double& ds) {
    double ac = 0.0, as = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ac += x[i] * c[i];
        as += x[i] * s[i];
    }
    dc = ac;
    ds = as;
}

void modulated_cosine(double* dst, std::size_t n, double a0, double da,
                      double b0, double db, double ph0, double dph) {
    for (std::size_t i = 0; i < n; ++i) {
        const double fi = static_cast<double>(i);
        dst[i] = (a0 + fi * da) * (b0 + fi * db) * std::cos(ph0 + fi * dph);
    }
}

void add_inplace(double* dst, const double* src, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
}

}  // namespace scalar

#if defined(__x86_64__)
namespace avx2 {
void dual_dot(const double* x, const double* c, const double* s, std::size_t n,
              double& dc, double& ds);
void modulated_cosine(double* dst, std::size_t n, double a0, double da,
                      double b0, double db, double ph0, double dph);
void add_inplace(double* dst, const double* src, std::size_t n);
}  // namespace avx2
#endif

bool cpu_has_avx2() {
#if defined(__x86_64__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

std::string_view backend_name(Backend b) {
    switch (b) {
        case Backend::Scalar: return "scalar";
        case Backend::Avx2: return "avx2";
    }
    return "?";
}

Backend default_backend() {
    if (const char* env = std::getenv("MMUHEAL_BACKEND")) {
        if (std::strcmp(env, "scalar") == 0) return Backend::Scalar;
        if (std::strcmp(env, "avx2") == 0) {
            if (!cpu_has_avx2()) fail("MMUHEAL_BACKEND=avx2 but CPU lacks AVX2/FMA");
            return Backend::Avx2;
        }
        fail(std::string("unknown MMUHEAL_BACKEND value: ") + env);
    }
    return cpu_has_avx2() ? Backend::Avx2 : Backend::Scalar;
}

namespace {
Backend& backend_slot() {
    static Backend b = default_backend();
    return b;
}
}  // namespace

Backend active_backend() { return backend_slot(); }

void force_backend(Backend b) {
    if (b == Backend::Avx2 && !cpu_has_avx2())
        fail("cannot force avx2 backend: CPU lacks AVX2/FMA");
    backend_slot() = b;
}

void dual_dot(const double* x, const double* c, const double* s, std::size_t n,
              double& dc, double& ds) {
#if defined(__x86_64__)
    if (active_backend() == Backend::Avx2) {
        avx2::dual_dot(x, c, s, n, dc, ds);
        return;
    }
#endif
    scalar::dual_dot(x, c, s, n, dc, ds);
}

void modulated_cosine(double* dst, std::size_t n, double a0, double da,
                      double b0, double db, double ph0, double dph) {
#if defined(__x86_64__)
    if (active_backend() == Backend::Avx2) {
        avx2::modulated_cosine(dst, n, a0, da, b0, db, ph0, dph);
        return;
    }
#endif
    scalar::modulated_cosine(dst, n, a0, da, b0, db, ph0, dph);
}

void add_inplace(double* dst, const double* src, std::size_t n) {
#if defined(__x86_64__)
    if (active_backend() == Backend::Avx2) {
        avx2::add_inplace(dst, src, n);
        return;
    }
#endif
    scalar::add_inplace(dst, src, n);
}

}  // namespace mmu::kernels
