#pragma once

#include <string>
#include <vector>

#include "mmu/pca.hpp"
#include "mmu/sim.hpp"
#include "mmu/spe.hpp"

namespace mmu {

/// Everything a pipeline run needs: the scenario plus analysis parameters.
/// Loaded from a flat key-value config file; the scenario may be inlined in
/// the same file or referenced with `scenario_file = <path>` (resolved
/// relative to the config file).
struct PipelineConfig {
    ArrayScenario scenario;
    std::vector<std::string> unit_ids;  // column identities, scenario order

    double kappa = 0.85;
    double alpha = 0.99;
    double exceedance_rule = 0.05;
    double calib_window_s = 1.0;
    double train_window_s = 0.1;
    double test_window_s = 1.0;
    VarianceRule rule = VarianceRule::SquaredEigenvalues;
    bool h0_as_printed = false;
    double calib_max_nonlinearity = 5e-3;
    std::string out_dir = "out";
    bool dump_waveforms = false;
    bool dump_audit = false;

    /// Window/segment consistency: windows must hold an integer number of
    /// signal periods and tile their segments exactly.
    void validate() const;
};

PipelineConfig load_config(const std::string& path);

}  // namespace mmu
