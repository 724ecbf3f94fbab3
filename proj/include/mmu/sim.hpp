#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mmu/phasor.hpp"

namespace mmu {

constexpr double kMu0 = 4.0e-7 * 3.141592653589793238462643383279502884;  // T*m/A

/// Piecewise-linear time function. Evaluation clamps to the first/last value
/// outside the breakpoint span. Two consecutive breakpoints may share a time
/// stamp to encode a step (right-continuous).
class PiecewiseLinear {
public:
    PiecewiseLinear() = default;  // identically zero
    explicit PiecewiseLinear(std::vector<std::pair<double, double>> pts);

    double operator()(double t) const;
    bool empty() const { return pts_.empty(); }
    bool is_zero() const;  // no breakpoints, or all values exactly 0
    const std::vector<std::pair<double, double>>& points() const { return pts_; }

    struct Segment {
        double value;  // at the query time
        double slope;  // per second, 0 outside the breakpoint span
        double t_end;  // segment valid for times < t_end
    };
    Segment segment_at(double t) const;

private:
    std::vector<std::pair<double, double>> pts_;
};

struct GeometryModel {
    struct Unit {
        double radius_m = 0.0;
        double angle_rad = 0.0;  // position on the ring; informational
        double alignment = 1.0;  // cos(sensing axis, local tangent), in (0, 1]
    };
    std::vector<Unit> units;

    std::size_t size() const { return units.size(); }
    void validate() const;
};

struct DriftSchedule {
    struct UnitDrift {
        double eps0 = 0.0;      // initial relative amplitude error
        double delta0 = 0.0;    // initial phase error, rad
        PiecewiseLinear d_eps;    // amplitude-error drift over time
        PiecewiseLinear d_delta;  // phase-error drift over time, rad
    };
    std::vector<UnitDrift> units;
};

struct ArrayScenario {
    std::string name;
    GeometryModel geometry;
    PiecewiseLinear excitation_amps;      // conductor current amplitude, A
    double frequency_hz = 60.0;
    double base_phase_rad = 0.0;          // current phase
    DriftSchedule drift;
    std::vector<double> noise_v_rms;      // per unit, additive voltage noise
    std::vector<double> gain_v_per_t;     // per unit electronics gain
    std::vector<double> elec_phase_rad;   // per unit electronics phase shift
    double sample_rate_hz = 20000.0;
    double duration_s = 0.0;
    std::uint64_t seed = 1;
    bool ref_perturb = false;  // emulate zero-flux-sensor class errors on REF
    double calib_end_s = 0.0;  // [0, calib_end): calibration sweep
    double train_end_s = 0.0;  // [calib_end, train_end): training; rest: test

    std::size_t unit_count() const { return geometry.size(); }
    std::int64_t total_samples() const;
    void validate() const;
};

/// Field at unit k (0-based) for a conductor current phasor, straight-line
/// Biot-Savart with tangential projection: B = mu0*I*alignment/(2*pi*r),
/// phase equal to the current's.
Phasor theoretical_field(const GeometryModel& g, std::size_t k, const Phasor& current);

/// Measurement error model: amplitude scaled by (1 + eps0 + d_eps(t)),
/// phase shifted by delta0 + d_delta(t). Throws if the amplitude factor
/// is not positive.
Phasor apply_drift(const Phasor& field, std::size_t k, double t, const DriftSchedule& d);

/// Deterministic N(0,1) stream: explicit Box-Muller over mt19937_64, so the
/// sequence depends only on (seed, stream_id), not on the standard library's
/// distribution implementation.
class GaussStream {
public:
    GaussStream(std::uint64_t seed, std::uint64_t stream_id);
    double next();

private:
    std::mt19937_64 rng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Sequential sample generator for one channel of the scenario.
/// Channels 0..N-1 are MMU output voltages (volts); channel N is the
/// reference current waveform (amperes, noiseless). Streams are generated
/// strictly in time order; consecutive next() calls continue the stream.
class ChannelStream {
public:
    ChannelStream(const ArrayScenario& sc, std::size_t channel);

    void next(std::span<double> out);
    std::int64_t position() const { return pos_; }
    std::int64_t total_samples() const { return total_; }

private:
    struct Span {
        std::int64_t first = 0, last = 0;  // sample index range [first, last)
        double exc_value = 0, exc_slope = 0;  // amperes, at first sample
        double amp_value = 0, amp_slope = 0;  // drift+gain factor, at first sample
        double ph0 = 0, dph = 0;              // carrier phase at first sample
    };
    std::vector<Span> spans_;
    std::size_t span_idx_ = 0;
    std::int64_t pos_ = 0, total_ = 0;
    double noise_sigma_ = 0.0;
    GaussStream noise_;
    std::vector<double> scratch_;
};

}  // namespace mmu
