#pragma once

#include <cstddef>
#include <string_view>

// Arithmetic inner loops used by waveform synthesis and lock-in extraction.
// Each kernel has a scalar reference implementation (the ground truth) and,
// on x86-64 with AVX2+FMA, a vectorized variant selected once at startup.
// The variants are equivalence-tested against the references; they are not
// bit-identical (FMA and reassociation), but agree to ~1e-12 relative.

namespace mmu::kernels {

enum class Backend { Scalar, Avx2 };

/// Backend used by all kernel entry points below.
Backend active_backend();

/// Force a backend (tests, benchmarking). Throws if unsupported on this CPU.
void force_backend(Backend b);

/// Pick the best backend supported by this CPU. Honors the MMUHEAL_BACKEND
/// environment variable ("scalar" or "avx2") when set.
Backend default_backend();

bool cpu_has_avx2();
std::string_view backend_name(Backend b);

/// dc = sum(x[i]*c[i]), ds = sum(x[i]*s[i]) in one pass.
void dual_dot(const double* x, const double* c, const double* s, std::size_t n,
              double& dc, double& ds);

/// dst[i] = (a0 + i*da) * (b0 + i*db) * cos(ph0 + i*dph), i = 0..n-1.
/// The two linear factors carry excitation and error-drift ramps; the cosine
/// argument carries the carrier plus any linear phase drift.
void modulated_cosine(double* dst, std::size_t n, double a0, double da,
                      double b0, double db, double ph0, double dph);

/// dst[i] += src[i]
void add_inplace(double* dst, const double* src, std::size_t n);

// Scalar references, exposed for equivalence tests.
namespace scalar {
void dual_dot(const double* x, const double* c, const double* s, std::size_t n,
              double& dc, double& ds);
void modulated_cosine(double* dst, std::size_t n, double a0, double da,
                      double b0, double db, double ph0, double dph);
void add_inplace(double* dst, const double* src, std::size_t n);
}  // namespace scalar

}  // namespace mmu::kernels
