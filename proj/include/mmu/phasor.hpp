#pragma once

#include <complex>
#include <span>
#include <vector>

// Phase convention, used everywhere in this project including calibration:
// a Phasor (A, phi) represents the real signal
//
//     x(t) = A * cos(2*pi*f*t + phi)
//
// with t in absolute scenario time. So a pure sine A*sin(2*pi*f*t) extracts
// as (A, -pi/2). Extraction references the window's start_time, which makes
// the phase of a steady tone independent of window placement.

namespace mmu {

struct Phasor {
    double amplitude = 0.0;  // >= 0, in signal units (T, V or A by context)
    double phase = 0.0;      // radians in (-pi, pi]
};

/// Wrap an angle to the principal interval (-pi, pi].
double wrap_angle(double a);

/// Validating constructor: requires amplitude >= 0, wraps the phase.
Phasor make_phasor(double amplitude, double phase);

std::complex<double> to_complex(const Phasor& p);
Phasor phasor_from_complex(std::complex<double> z);

struct SampledWindow {
    std::span<const double> samples;
    double sample_rate = 0.0;  // Hz
    double start_time = 0.0;   // s
};

/// Quadrature lock-in (single-bin DFT) plan for a fixed window shape.
/// Precomputes the in-phase/quadrature reference tables once so repeated
/// extraction over a stream only costs one dual dot product per window.
///
/// Requires the window to span an integer number >= 1 of periods of the
/// target frequency, with strictly more than 2 samples per period.
class LockInPlan {
public:
    LockInPlan(double frequency, double sample_rate, std::size_t window_len);

    Phasor extract(const SampledWindow& w) const;

    double frequency() const { return frequency_; }
    double sample_rate() const { return sample_rate_; }
    std::size_t window_len() const { return n_; }
    std::size_t cycles() const { return cycles_; }

private:
    double frequency_ = 0.0;
    double sample_rate_ = 0.0;
    std::size_t n_ = 0;
    std::size_t cycles_ = 0;
    std::vector<double> ref_cos_, ref_sin_;
};

/// One-shot extraction. For streams prefer constructing a LockInPlan.
Phasor extract_phasor(const SampledWindow& w, double frequency);

/// Classic first-difference unwrap: output[0] = input[0] and successive
/// differences are mapped to (-pi, pi]; output == input modulo 2*pi.
std::vector<double> unwrap_phase(std::span<const double> series);

/// Direction of the mean unit vector; 0 for an empty span.
double circular_mean(std::span<const double> angles);

/// Circular standard deviation sqrt(-2 ln Rbar); 0 for fewer than 2 angles.
double circular_std(std::span<const double> angles);

}  // namespace mmu
