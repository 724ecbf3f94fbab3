// mmuheal: simulate a magnetic-array current sensor, monitor the units with
// PCA residual (Q) statistics, identify drifted units and heal the current
// estimate by excluding them. Stages can run one at a time against a shared
// output directory, or all at once with `all`.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "mmu/config.hpp"
#include "mmu/errors.hpp"
#include "mmu/kernels.hpp"
#include "mmu/pipeline.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<double> alpha;
    std::optional<double> kappa;
    bool paper_mode = false;
    std::optional<std::string> backend;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "pipeline/scenario config file")
        ->required();
    cmd->add_option("--out", opts.out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", opts.seed, "scenario seed (overrides config)");
    cmd->add_option("--alpha", opts.alpha, "monitoring confidence level");
    cmd->add_option("--kappa", opts.kappa, "principal-component variance threshold");
    cmd->add_flag("--paper-mode", opts.paper_mode,
                  "squared-eigenvalue component rule plus h0 denominator as printed");
    cmd->add_option("--backend", opts.backend, "kernel backend: scalar or avx2");
}

mmu::PipelineConfig load(const CommonOpts& opts) {
    if (opts.backend) {
        if (*opts.backend == "scalar")
            mmu::kernels::force_backend(mmu::kernels::Backend::Scalar);
        else if (*opts.backend == "avx2")
            mmu::kernels::force_backend(mmu::kernels::Backend::Avx2);
        else
            mmu::fail("unknown --backend value: " + *opts.backend);
    }
    mmu::PipelineConfig cfg = mmu::load_config(opts.config_path);
    if (opts.out_dir) cfg.out_dir = *opts.out_dir;
    if (opts.seed) cfg.scenario.seed = *opts.seed;
    if (opts.alpha) cfg.alpha = *opts.alpha;
    if (opts.kappa) cfg.kappa = *opts.kappa;
    if (opts.paper_mode) {
        cfg.rule = mmu::VarianceRule::SquaredEigenvalues;
        cfg.h0_as_printed = true;
    }
    cfg.validate();
    std::filesystem::create_directories(cfg.out_dir);
    return cfg;
}

std::string art(const mmu::PipelineConfig& cfg, const char* name) {
    return mmu::artifact_path(cfg, name);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"self-healing magnetic-array current sensor pipeline"};
    app.require_subcommand(1);

    CommonOpts opts;
    bool dump_waveforms = false;
    bool dump_audit = false;

    auto* c_simulate = app.add_subcommand("simulate", "synthesize waveforms.csv");
    auto* c_extract = app.add_subcommand("extract", "waveforms.csv -> phasors.csv");
    auto* c_calibrate = app.add_subcommand("calibrate", "phasors.csv -> calibration.csv");
    auto* c_train = app.add_subcommand("train", "fit the full-array models");
    auto* c_monitor = app.add_subcommand("monitor", "full-array Q series on the test segment");
    auto* c_identify = app.add_subcommand("identify", "two-step abnormal-unit identification");
    auto* c_heal = app.add_subcommand("heal", "conventional vs healed current estimates");
    auto* c_report = app.add_subcommand("report", "figure CSVs and summary.txt");
    auto* c_all = app.add_subcommand("all", "run the whole pipeline");
    for (auto* cmd : {c_simulate, c_extract, c_calibrate, c_train, c_monitor, c_identify,
                      c_heal, c_report, c_all})
        add_common(cmd, opts);
    c_all->add_flag("--dump-waveforms", dump_waveforms,
                    "also persist raw waveforms.csv (large)");
    c_all->add_flag("--dump-audit", dump_audit,
                    "dump per-combination Q series under out/audit/");

    CLI11_PARSE(app, argc, argv);

    try {
        mmu::PipelineConfig cfg = load(opts);
        if (c_all->parsed()) {
            cfg.dump_waveforms = cfg.dump_waveforms || dump_waveforms;
            cfg.dump_audit = cfg.dump_audit || dump_audit;
            const mmu::PipelineResult result = mmu::run_pipeline(cfg);
            std::cout << "reference pair (amplitude): "
                      << result.identification.amplitude.reference_pair[0] << " "
                      << result.identification.amplitude.reference_pair[1] << "\n";
            std::cout << "reference pair (phase): "
                      << result.identification.phase.reference_pair[0] << " "
                      << result.identification.phase.reference_pair[1] << "\n";
            std::cout << "abnormal units:";
            if (result.identification.combined_abnormal.empty()) std::cout << " (none)";
            for (const auto& u : result.identification.combined_abnormal)
                std::cout << ' ' << u;
            std::cout << "\nartifacts in " << cfg.out_dir << "\n";
            return 0;
        }

        if (c_simulate->parsed()) {
            mmu::stage_simulate(cfg);
            std::cout << art(cfg, mmu::artifact::waveforms) << "\n";
            return 0;
        }
        if (c_extract->parsed()) {
            const auto set =
                mmu::stage_extract_from_waveforms(cfg, art(cfg, mmu::artifact::waveforms));
            mmu::save_phasors(set, art(cfg, mmu::artifact::phasors));
            std::cout << art(cfg, mmu::artifact::phasors) << "\n";
            return 0;
        }

        const auto set = mmu::load_phasors(art(cfg, mmu::artifact::phasors));
        if (c_calibrate->parsed()) {
            const auto table = mmu::stage_calibrate(cfg, set);
            mmu::save_calibration(table, art(cfg, mmu::artifact::calibration));
            std::cout << art(cfg, mmu::artifact::calibration) << "\n";
        } else if (c_train->parsed()) {
            const auto models = mmu::stage_train(cfg, set);
            mmu::save_model(models.amplitude, art(cfg, mmu::artifact::model_amplitude));
            mmu::save_model(models.phase, art(cfg, mmu::artifact::model_phase));
            std::cout << art(cfg, mmu::artifact::model_amplitude) << "\n"
                      << art(cfg, mmu::artifact::model_phase) << "\n";
        } else if (c_monitor->parsed()) {
            mmu::TrainedModels models;
            models.amplitude = mmu::load_model(art(cfg, mmu::artifact::model_amplitude));
            models.phase = mmu::load_model(art(cfg, mmu::artifact::model_phase));
            const auto monitor = mmu::stage_monitor(cfg, set, models);
            mmu::save_q_series(monitor.amplitude, art(cfg, mmu::artifact::q_full_amplitude));
            mmu::save_q_series(monitor.phase, art(cfg, mmu::artifact::q_full_phase));
            std::cout << art(cfg, mmu::artifact::q_full_amplitude) << "\n"
                      << art(cfg, mmu::artifact::q_full_phase) << "\n";
        } else if (c_identify->parsed()) {
            const auto report = mmu::stage_identify(cfg, set);
            mmu::save_pair_scores(report, art(cfg, mmu::artifact::pair_scores));
            mmu::save_triples(report.amplitude, art(cfg, mmu::artifact::triples_amplitude));
            mmu::save_triples(report.phase, art(cfg, mmu::artifact::triples_phase));
            mmu::save_identification(report, art(cfg, mmu::artifact::identification));
            std::cout << art(cfg, mmu::artifact::identification) << "\n";
        } else if (c_heal->parsed()) {
            const auto table = mmu::load_calibration(art(cfg, mmu::artifact::calibration));
            const auto report =
                mmu::load_identification(art(cfg, mmu::artifact::identification));
            const auto healed =
                mmu::stage_heal(cfg, set, table, report.combined_abnormal);
            mmu::save_healed(healed, art(cfg, mmu::artifact::healed));
            std::cout << art(cfg, mmu::artifact::healed) << "\n";
        } else if (c_report->parsed()) {
            const auto table = mmu::load_calibration(art(cfg, mmu::artifact::calibration));
            const auto report =
                mmu::load_identification(art(cfg, mmu::artifact::identification));
            const auto healed = mmu::load_healed(art(cfg, mmu::artifact::healed));
            mmu::stage_report(cfg, set, table, report, healed);
            std::cout << art(cfg, mmu::artifact::summary) << "\n";
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
