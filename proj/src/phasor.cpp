#include "mmu/phasor.hpp"

#include <algorithm>
#include <cmath>

#include "mmu/errors.hpp"
#include "mmu/kernels.hpp"

namespace mmu {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kTwoPi = 2.0 * kPi;
}  // namespace

double wrap_angle(double a) {
    double r = std::remainder(a, kTwoPi);  // (-pi, pi) plus +-pi boundary
    if (r <= -kPi) r = kPi;                // map -pi to +pi
    return r;
}

Phasor make_phasor(double amplitude, double phase) {
    if (!(amplitude >= 0.0) || !std::isfinite(amplitude))
        fail("phasor amplitude must be finite and >= 0");
    if (!std::isfinite(phase)) fail("phasor phase must be finite");
    return Phasor{amplitude, wrap_angle(phase)};
}

std::complex<double> to_complex(const Phasor& p) {
    return std::polar(p.amplitude, p.phase);
}

Phasor phasor_from_complex(std::complex<double> z) {
    const double a = std::abs(z);
    return Phasor{a, a == 0.0 ? 0.0 : std::arg(z)};
}

LockInPlan::LockInPlan(double frequency, double sample_rate, std::size_t window_len)
    : frequency_(frequency), sample_rate_(sample_rate), n_(window_len) {
    if (!(frequency > 0.0)) fail("lock-in: frequency must be > 0");
    if (!(sample_rate > 0.0)) fail("lock-in: sample rate must be > 0");
    if (n_ < 2) fail("lock-in: window too short (need at least 2 samples)");

    const double cycles = static_cast<double>(n_) * frequency / sample_rate;
    const double rounded = std::round(cycles);
    if (std::abs(cycles - rounded) > 1e-9 * std::max(1.0, cycles))
        fail("lock-in: window does not span an integer number of periods");
    if (rounded < 1.0) fail("lock-in: window shorter than one period");
    cycles_ = static_cast<std::size_t>(rounded);
    if (n_ <= 2 * cycles_)
        fail("lock-in: need more than 2 samples per period");

    ref_cos_.resize(n_);
    ref_sin_.resize(n_);
    const double dtheta = kTwoPi * frequency_ / sample_rate_;
    for (std::size_t j = 0; j < n_; ++j) {
        const double th = dtheta * static_cast<double>(j);
        ref_cos_[j] = std::cos(th);
        ref_sin_[j] = std::sin(th);
    }
}

Phasor LockInPlan::extract(const SampledWindow& w) const {
    if (w.samples.size() != n_)
        fail("lock-in: window length does not match plan");
    if (std::abs(w.sample_rate - sample_rate_) > 1e-9 * sample_rate_)
        fail("lock-in: window sample rate does not match plan");

    double dc = 0.0, ds = 0.0;
    kernels::dual_dot(w.samples.data(), ref_cos_.data(), ref_sin_.data(), n_, dc, ds);
    const double scale = 2.0 / static_cast<double>(n_);
    const double in_phase = scale * dc;        //  A cos(phi_rel)
    const double quadrature = -scale * ds;     //  A sin(phi_rel)
    const double amp = std::hypot(in_phase, quadrature);
    if (amp == 0.0) return Phasor{0.0, 0.0};
    const double phi_rel = std::atan2(quadrature, in_phase);
    // Re-reference from window start to absolute time.
    const double phi = phi_rel - kTwoPi * frequency_ * w.start_time;
    return Phasor{amp, wrap_angle(phi)};
}

Phasor extract_phasor(const SampledWindow& w, double frequency) {
    LockInPlan plan(frequency, w.sample_rate, w.samples.size());
    return plan.extract(w);
}

std::vector<double> unwrap_phase(std::span<const double> series) {
    std::vector<double> out(series.size());
    if (series.empty()) return out;
    out[0] = series[0];
    for (std::size_t i = 1; i < series.size(); ++i) {
        const double step = wrap_angle(series[i] - series[i - 1]);
        out[i] = out[i - 1] + step;
    }
    return out;
}

double circular_mean(std::span<const double> angles) {
    if (angles.empty()) return 0.0;
    double ss = 0.0, cc = 0.0;
    for (double a : angles) {
        ss += std::sin(a);
        cc += std::cos(a);
    }
    if (ss == 0.0 && cc == 0.0) return 0.0;
    return std::atan2(ss, cc);
}

double circular_std(std::span<const double> angles) {
    if (angles.size() < 2) return 0.0;
    double ss = 0.0, cc = 0.0;
    for (double a : angles) {
        ss += std::sin(a);
        cc += std::cos(a);
    }
    const double rbar =
        std::min(1.0, std::hypot(ss, cc) / static_cast<double>(angles.size()));
    if (rbar <= 0.0) return kPi;  // fully dispersed
    return std::sqrt(std::max(0.0, -2.0 * std::log(rbar)));
}

}  // namespace mmu
