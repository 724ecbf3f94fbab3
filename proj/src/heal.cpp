#include "mmu/heal.hpp"

#include <algorithm>
#include <complex>

#include "mmu/errors.hpp"

namespace mmu {

Phasor estimate_current(std::span<const Phasor> units,
                        const std::vector<std::string>& unit_ids,
                        const CalibrationTable& table,
                        const std::vector<std::string>& included) {
    if (units.size() != unit_ids.size())
        fail("estimate_current: phasor/id count mismatch");
    if (included.empty()) fail("estimate_current: inclusion set is empty");

    std::complex<double> acc{0.0, 0.0};
    std::size_t used = 0;
    for (std::size_t k = 0; k < units.size(); ++k) {
        if (std::find(included.begin(), included.end(), unit_ids[k]) == included.end())
            continue;
        const CalibrationRow& row = table.by_unit(unit_ids[k]);
        acc += row.xi * std::polar(units[k].amplitude, units[k].phase + row.phi);
        ++used;
    }
    if (used != included.size())
        fail("estimate_current: inclusion set names units missing from the data");
    return phasor_from_complex(acc / static_cast<double>(used));
}

HealedEstimate compare(std::span<const Phasor> conventional,
                       std::span<const Phasor> healed,
                       std::span<const Phasor> reference,
                       std::span<const double> t,
                       std::vector<std::string> excluded) {
    const std::size_t n = reference.size();
    if (conventional.size() != n || healed.size() != n || t.size() != n)
        fail("compare: series are not aligned");

    HealedEstimate out;
    out.t.assign(t.begin(), t.end());
    out.conventional.assign(conventional.begin(), conventional.end());
    out.healed.assign(healed.begin(), healed.end());
    out.reference.assign(reference.begin(), reference.end());
    out.excluded = std::move(excluded);
    out.eps_a_conventional.resize(n);
    out.eps_p_conventional.resize(n);
    out.eps_a_healed.resize(n);
    out.eps_p_healed.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const UnitErrors conv = unit_errors(conventional[i], reference[i]);
        const UnitErrors heal = unit_errors(healed[i], reference[i]);
        out.eps_a_conventional[i] = conv.rel_amplitude;
        out.eps_p_conventional[i] = conv.phase;
        out.eps_a_healed[i] = heal.rel_amplitude;
        out.eps_p_healed[i] = heal.phase;
    }
    return out;
}

}  // namespace mmu
