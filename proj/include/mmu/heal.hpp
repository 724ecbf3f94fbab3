#pragma once

#include <span>
#include <string>
#include <vector>

#include "mmu/calib.hpp"
#include "mmu/phasor.hpp"

namespace mmu {

/// Current estimate from unit voltage phasors via the calibration table:
/// the complex mean of xi_k * U_k * e^{i phi_k} over the included units.
/// unit_ids gives the column identity of each entry of `units`.
Phasor estimate_current(std::span<const Phasor> units,
                        const std::vector<std::string>& unit_ids,
                        const CalibrationTable& table,
                        const std::vector<std::string>& included);

struct HealedEstimate {
    std::vector<double> t;
    std::vector<Phasor> conventional;  // all units averaged
    std::vector<Phasor> healed;        // abnormal units excluded
    std::vector<Phasor> reference;
    std::vector<std::string> excluded;
    std::vector<double> eps_a_conventional, eps_p_conventional;
    std::vector<double> eps_a_healed, eps_p_healed;
};

/// Per-row errors of both estimates against the reference channel.
HealedEstimate compare(std::span<const Phasor> conventional,
                       std::span<const Phasor> healed,
                       std::span<const Phasor> reference,
                       std::span<const double> t,
                       std::vector<std::string> excluded);

}  // namespace mmu
