#include "mmu/calib.hpp"

#include <algorithm>
#include <cmath>

#include "mmu/errors.hpp"

namespace mmu {

const CalibrationRow& CalibrationTable::by_unit(const std::string& unit_id) const {
    for (const auto& r : rows)
        if (r.unit_id == unit_id) return r;
    fail("calibration table: unknown unit " + unit_id);
}

CalibrationRow calibrate(const std::string& unit_id, std::span<const Phasor> unit,
                         std::span<const Phasor> reference,
                         const CalibrationLimits& limits) {
    if (unit.size() != reference.size())
        fail("calibrate(" + unit_id + "): series lengths differ");
    const std::size_t n = unit.size();
    if (n < 2) fail("calibrate(" + unit_id + "): need at least 2 points");

    // Distinct reference amplitude levels (tolerance scaled to full range).
    double y_max = 0.0;
    for (const auto& p : reference) y_max = std::max(y_max, p.amplitude);
    if (!(y_max > 0.0)) fail("calibrate(" + unit_id + "): reference sweep is all zero");
    std::vector<double> levels;
    for (const auto& p : reference) {
        bool found = false;
        for (double l : levels)
            if (std::abs(l - p.amplitude) <= 1e-6 * y_max) { found = true; break; }
        if (!found) levels.push_back(p.amplitude);
    }
    if (levels.size() < limits.min_levels)
        fail("calibrate(" + unit_id + "): fewer than " +
             std::to_string(limits.min_levels) + " distinct amplitude levels");

    // Least squares y = slope*x + intercept, x = unit volts, y = reference amps.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = unit[i].amplitude, y = reference[i].amplitude;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double fn = static_cast<double>(n);
    const double det = fn * sxx - sx * sx;
    if (!(std::abs(det) > 0.0))
        fail("calibrate(" + unit_id + "): degenerate sweep (constant unit amplitude)");
    const double slope = (fn * sxy - sx * sy) / det;
    const double intercept = (sy - slope * sx) / fn;
    if (!(slope > 0.0)) fail("calibrate(" + unit_id + "): non-positive scale factor");

    double max_resid = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double fit = slope * unit[i].amplitude + intercept;
        max_resid = std::max(max_resid, std::abs(reference[i].amplitude - fit));
    }
    const double nonlinearity = max_resid / y_max;
    if (nonlinearity > limits.max_nonlinearity)
        fail("calibrate(" + unit_id + "): nonlinearity " + std::to_string(nonlinearity) +
             " exceeds bound " + std::to_string(limits.max_nonlinearity));

    std::vector<double> offsets(n);
    for (std::size_t i = 0; i < n; ++i)
        offsets[i] = wrap_angle(reference[i].phase - unit[i].phase);

    CalibrationRow row;
    row.unit_id = unit_id;
    row.xi = slope;
    row.intercept = intercept;
    row.nonlinearity = nonlinearity;
    row.phi = circular_mean(offsets);
    row.phase_std = circular_std(offsets);
    return row;
}

Phasor reference_phasor(const CalibrationRow& row, const Phasor& reference_current) {
    return Phasor{reference_current.amplitude / row.xi,
                  wrap_angle(reference_current.phase - row.phi)};
}

UnitErrors unit_errors(const Phasor& measured, const Phasor& reference) {
    if (!(reference.amplitude > 0.0))
        fail("unit_errors: reference amplitude must be > 0");
    return UnitErrors{measured.amplitude / reference.amplitude - 1.0,
                      wrap_angle(measured.phase - reference.phase)};
}

}  // namespace mmu
