#include "mmu/sim.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mmu/errors.hpp"
#include "mmu/kernels.hpp"

namespace mmu {

namespace {
constexpr double kTwoPi = 2.0 * 3.141592653589793238462643383279502884;

// splitmix64, used only to spread (seed, stream) into mt19937_64 seeds.
std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}
}  // namespace

PiecewiseLinear::PiecewiseLinear(std::vector<std::pair<double, double>> pts)
    : pts_(std::move(pts)) {
    for (std::size_t i = 1; i < pts_.size(); ++i) {
        if (pts_[i].first < pts_[i - 1].first)
            fail("piecewise-linear breakpoints must be time-sorted");
        if (i >= 2 && pts_[i].first == pts_[i - 2].first)
            fail("piecewise-linear: more than two breakpoints share a time");
    }
    for (auto& [t, v] : pts_)
        if (!std::isfinite(t) || !std::isfinite(v))
            fail("piecewise-linear breakpoint is not finite");
}

bool PiecewiseLinear::is_zero() const {
    for (auto& [t, v] : pts_)
        if (v != 0.0) return false;
    return true;
}

PiecewiseLinear::Segment PiecewiseLinear::segment_at(double t) const {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    if (pts_.empty()) return {0.0, 0.0, kInf};
    if (t < pts_.front().first) return {pts_.front().second, 0.0, pts_.front().first};
    if (t >= pts_.back().first) return {pts_.back().second, 0.0, kInf};
    // last index with time <= t; for a step (duplicate time) this lands on
    // the second entry, making the function right-continuous
    auto it = std::upper_bound(pts_.begin(), pts_.end(), t,
                               [](double x, const auto& p) { return x < p.first; });
    const std::size_t i = static_cast<std::size_t>(it - pts_.begin()) - 1;
    const auto [t0, v0] = pts_[i];
    const auto [t1, v1] = pts_[i + 1];
    if (t1 == t0) return {v0, 0.0, t1};  // zero-length shelf before a step
    const double slope = (v1 - v0) / (t1 - t0);
    return {v0 + slope * (t - t0), slope, t1};
}

double PiecewiseLinear::operator()(double t) const { return segment_at(t).value; }

void GeometryModel::validate() const {
    if (units.size() < 3) fail("geometry: need at least 3 units");
    for (std::size_t k = 0; k < units.size(); ++k) {
        if (!(units[k].radius_m > 0.0)) fail("geometry: radius must be > 0");
        if (!(units[k].alignment > 0.0 && units[k].alignment <= 1.0))
            fail("geometry: alignment must be in (0, 1]");
    }
}

std::int64_t ArrayScenario::total_samples() const {
    return static_cast<std::int64_t>(std::llround(duration_s * sample_rate_hz));
}

void ArrayScenario::validate() const {
    geometry.validate();
    const std::size_t n = geometry.size();
    if (!(duration_s > 0.0)) fail("scenario: duration must be > 0");
    if (!(frequency_hz > 0.0)) fail("scenario: frequency must be > 0");
    if (!(sample_rate_hz > 0.0)) fail("scenario: sample rate must be > 0");
    if (drift.units.size() != n) fail("scenario: drift table size mismatch");
    if (noise_v_rms.size() != n) fail("scenario: noise table size mismatch");
    if (gain_v_per_t.size() != n) fail("scenario: gain table size mismatch");
    if (elec_phase_rad.size() != n) fail("scenario: electronics phase table size mismatch");
    for (double g : gain_v_per_t)
        if (!(g > 0.0)) fail("scenario: gains must be > 0");
    for (double s : noise_v_rms)
        if (!(s >= 0.0)) fail("scenario: noise sigma must be >= 0");
    if (!(calib_end_s >= 0.0 && calib_end_s <= train_end_s && train_end_s <= duration_s))
        fail("scenario: segment boundaries must satisfy 0 <= calib_end <= train_end <= duration");
    // Amplitude factor must stay positive; linear pieces attain extrema at
    // breakpoints and the segment ends.
    for (std::size_t k = 0; k < n; ++k) {
        const auto& d = drift.units[k];
        auto factor_ok = [&](double t) {
            return 1.0 + d.eps0 + d.d_eps(t) > 0.0;
        };
        if (!factor_ok(0.0) || !factor_ok(duration_s))
            fail("scenario: amplitude error factor not positive");
        for (auto& [t, v] : d.d_eps.points())
            if (!(1.0 + d.eps0 + v > 0.0))
                fail("scenario: amplitude error factor not positive");
    }
}

Phasor theoretical_field(const GeometryModel& g, std::size_t k, const Phasor& current) {
    if (k >= g.size()) fail("theoretical_field: unit index out of range");
    const auto& u = g.units[k];
    const double amp = kMu0 * current.amplitude * u.alignment / (kTwoPi * u.radius_m);
    return Phasor{amp, current.phase};
}

Phasor apply_drift(const Phasor& field, std::size_t k, double t, const DriftSchedule& d) {
    if (k >= d.units.size()) fail("apply_drift: unit index out of range");
    const auto& u = d.units[k];
    const double factor = 1.0 + u.eps0 + u.d_eps(t);
    if (!(factor > 0.0)) fail("apply_drift: amplitude error factor must stay positive");
    return Phasor{factor * field.amplitude,
                  wrap_angle(field.phase + u.delta0 + u.d_delta(t))};
}

GaussStream::GaussStream(std::uint64_t seed, std::uint64_t stream_id) {
    std::uint64_t x = seed ^ (0xA076'1D64'78BD'642FULL * (stream_id + 1));
    std::uint64_t s0 = splitmix64(x);
    rng_.seed(s0);
}

double GaussStream::next() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // 53-bit uniforms; u1 in (0, 1] so the log is finite.
    const double u1 =
        1.0 - static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    const double u2 = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = kTwoPi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

ChannelStream::ChannelStream(const ArrayScenario& sc, std::size_t channel)
    : noise_(sc.seed, channel) {
    sc.validate();
    const std::size_t n_units = sc.unit_count();
    if (channel > n_units) fail("channel stream: channel index out of range");
    const bool is_ref = channel == n_units;
    total_ = sc.total_samples();
    const double fs = sc.sample_rate_hz;
    const double omega = kTwoPi * sc.frequency_hz;

    // Span boundaries: every breakpoint of the excitation profile and (for a
    // unit channel) of that unit's drift schedules. Schedules that are
    // identically zero contribute none, so an untouched unit's stream is
    // bit-identical to its zero-drift twin.
    std::set<double> cuts{0.0, sc.duration_s};
    auto add_cuts = [&](const PiecewiseLinear& f) {
        if (f.is_zero()) return;
        for (auto& [t, v] : f.points())
            if (t > 0.0 && t < sc.duration_s) cuts.insert(t);
    };
    add_cuts(sc.excitation_amps);

    double const_phase = sc.base_phase_rad;
    double gain_align = 1.0;
    const PiecewiseLinear* d_eps = nullptr;
    const PiecewiseLinear* d_delta = nullptr;
    double eps0 = 0.0;
    if (!is_ref) {
        const auto& u = sc.geometry.units[channel];
        const auto& d = sc.drift.units[channel];
        add_cuts(d.d_eps);
        add_cuts(d.d_delta);
        gain_align = sc.gain_v_per_t[channel] * kMu0 * u.alignment / (kTwoPi * u.radius_m);
        const_phase += d.delta0 + sc.elec_phase_rad[channel];
        eps0 = d.eps0;
        d_eps = &d.d_eps;
        d_delta = &d.d_delta;
        noise_sigma_ = sc.noise_v_rms[channel];
    }

    std::int64_t first = 0;
    for (auto it = cuts.begin(); it != cuts.end(); ++it) {
        auto next_it = std::next(it);
        if (next_it == cuts.end()) break;
        const double t_end = *next_it;
        std::int64_t last = static_cast<std::int64_t>(std::ceil(t_end * fs - 1e-9));
        last = std::clamp<std::int64_t>(last, first, total_);
        if (last == first) continue;
        const double t0 = static_cast<double>(first) / fs;

        Span s;
        s.first = first;
        s.last = last;
        const auto exc = sc.excitation_amps.segment_at(t0);
        s.exc_value = exc.value;
        s.exc_slope = exc.slope / fs;
        if (is_ref) {
            s.amp_value = 1.0;
            s.amp_slope = 0.0;
            s.ph0 = omega * t0 + const_phase;
            s.dph = omega / fs;
        } else {
            const auto de = d_eps->segment_at(t0);
            s.amp_value = gain_align * (1.0 + eps0 + de.value);
            s.amp_slope = gain_align * de.slope / fs;
            const auto dd = d_delta->segment_at(t0);
            s.ph0 = omega * t0 + const_phase + dd.value;
            s.dph = (omega + dd.slope) / fs;
        }
        spans_.push_back(s);
        first = last;
    }
    if (first != total_) fail("channel stream: internal span partition error");
}

void ChannelStream::next(std::span<double> out) {
    if (pos_ + static_cast<std::int64_t>(out.size()) > total_)
        fail("channel stream: read past end of scenario");
    std::size_t written = 0;
    while (written < out.size()) {
        while (span_idx_ < spans_.size() && pos_ >= spans_[span_idx_].last) ++span_idx_;
        const Span& s = spans_[span_idx_];
        const std::int64_t offset = pos_ - s.first;
        const std::size_t count = static_cast<std::size_t>(
            std::min<std::int64_t>(s.last - pos_, static_cast<std::int64_t>(out.size() - written)));
        const double fo = static_cast<double>(offset);
        kernels::modulated_cosine(out.data() + written, count,
                                  s.exc_value + fo * s.exc_slope, s.exc_slope,
                                  s.amp_value + fo * s.amp_slope, s.amp_slope,
                                  s.ph0 + fo * s.dph, s.dph);
        pos_ += static_cast<std::int64_t>(count);
        written += count;
    }
    if (noise_sigma_ > 0.0) {
        scratch_.resize(out.size());
        for (double& v : scratch_) v = noise_sigma_ * noise_.next();
        kernels::add_inplace(out.data(), scratch_.data(), out.size());
    }
}

}  // namespace mmu
