#pragma once

#include <span>
#include <string>
#include <vector>

#include "mmu/phasor.hpp"

namespace mmu {

struct CalibrationRow {
    std::string unit_id;
    double xi = 0.0;            // scale factor, amperes per volt (fit slope)
    double phi = 0.0;           // rad, circular mean of (ref phase - unit phase)
    double nonlinearity = 0.0;  // max |amplitude fit residual| / full scale
    double phase_std = 0.0;     // circular std of per-point phase offsets, rad
    double intercept = 0.0;     // amperes; reported only, estimation is proportional
};

struct CalibrationTable {
    std::vector<CalibrationRow> rows;
    const CalibrationRow& by_unit(const std::string& unit_id) const;
};

struct CalibrationLimits {
    double max_nonlinearity = 5e-3;
    std::size_t min_levels = 2;  // distinct reference amplitudes required
};

/// Least-squares line (free intercept) of reference amplitude against unit
/// voltage amplitude; slope is the scale factor. Phase offset is the
/// circular mean of per-point (reference - unit) phase differences.
CalibrationRow calibrate(const std::string& unit_id, std::span<const Phasor> unit,
                         std::span<const Phasor> reference,
                         const CalibrationLimits& limits = {});

/// Expected unit output for a given conductor current: amplitude I/xi,
/// phase = current phase - phi.
Phasor reference_phasor(const CalibrationRow& row, const Phasor& reference_current);

struct UnitErrors {
    double rel_amplitude = 0.0;  // measured/reference - 1
    double phase = 0.0;          // rad, wrapped to (-pi, pi]
};

UnitErrors unit_errors(const Phasor& measured, const Phasor& reference);

}  // namespace mmu
