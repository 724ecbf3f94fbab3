#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mmu/calib.hpp"
#include "mmu/config.hpp"
#include "mmu/heal.hpp"
#include "mmu/identify.hpp"
#include "mmu/pca.hpp"
#include "mmu/phasor.hpp"
#include "mmu/spe.hpp"

namespace mmu {

/// Extracted phasors for the whole scenario, one row per analysis window.
/// The persisted form is phasors.csv: t_s, unit_id, amplitude, phase_rad,
/// kind_source (mmu_voltage for units, ref_current for the REF pseudo-unit).
struct PhasorSet {
    std::vector<double> t;              // window start per row
    std::vector<std::string> unit_ids;  // N columns
    Mat amp;                            // rows x N, volts
    Mat phase;                          // rows x N, wrapped radians
    std::vector<Phasor> ref;            // reference current per row

    std::size_t rows() const { return t.size(); }
};

struct SegmentRows {
    std::size_t begin = 0, end = 0;
    std::size_t count() const { return end - begin; }
};

struct Segments {
    SegmentRows calib, train, test;
};

/// Window row ranges implied by the config's segment and window settings.
Segments segment_rows(const PipelineConfig& cfg);

/// Matrix view of one signal kind over a row range. Phase columns are
/// unwrapped over the WHOLE series first so train and test share a branch.
DataMatrix data_matrix(const PhasorSet& set, SignalKind kind, SegmentRows rows);

/// Spec'd convenience: both full-range matrices from a phasors.csv file.
std::pair<DataMatrix, DataMatrix> ingest_phasors(const std::string& path);

// -- persistence ------------------------------------------------------------

void save_phasors(const PhasorSet& set, const std::string& path);
PhasorSet load_phasors(const std::string& path);

void save_calibration(const CalibrationTable& table, const std::string& path);
CalibrationTable load_calibration(const std::string& path);

void save_identification(const IdentificationReport& report, const std::string& path);
/// Reconstructs verdicts and reference pairs (not the audit Q series).
IdentificationReport load_identification(const std::string& path);

void save_q_series(const QSeries& q, const std::string& path);
void save_healed(const HealedEstimate& h, const std::string& path);
HealedEstimate load_healed(const std::string& path);

void save_pair_scores(const IdentificationReport& report, const std::string& path);
void save_triples(const KindReport& kr, const std::string& path);

// -- stages ------------------------------------------------------------------

/// Synthesize waveforms and write out/waveforms.csv (one row per sample:
/// t_s, ref_a, then one voltage column per unit).
void stage_simulate(const PipelineConfig& cfg);

/// Extraction driven directly by the synthesizer (no waveform file).
PhasorSet stage_extract_synth(const PipelineConfig& cfg);

/// Extraction from a previously written waveforms.csv.
PhasorSet stage_extract_from_waveforms(const PipelineConfig& cfg,
                                       const std::string& waveforms_csv);

CalibrationTable stage_calibrate(const PipelineConfig& cfg, const PhasorSet& set);

struct TrainedModels {
    PcaModel amplitude;
    PcaModel phase;
};

TrainedModels stage_train(const PipelineConfig& cfg, const PhasorSet& set);

struct MonitorResult {
    QSeries amplitude;
    QSeries phase;
};

/// Full-array Q series over the test segment against the trained models.
MonitorResult stage_monitor(const PipelineConfig& cfg, const PhasorSet& set,
                            const TrainedModels& models);

IdentificationReport stage_identify(const PipelineConfig& cfg, const PhasorSet& set);

HealedEstimate stage_heal(const PipelineConfig& cfg, const PhasorSet& set,
                          const CalibrationTable& table,
                          const std::vector<std::string>& excluded);

/// Figure-series CSVs (train/test per-unit errors) plus summary.txt.
void stage_report(const PipelineConfig& cfg, const PhasorSet& set,
                  const CalibrationTable& table, const IdentificationReport& report,
                  const HealedEstimate& healed);

struct PipelineResult {
    CalibrationTable calibration;
    IdentificationReport identification;
    HealedEstimate healed;
};

/// The whole chain: simulate/extract -> calibrate -> train -> monitor ->
/// identify -> heal -> report, persisting every artifact into cfg.out_dir
/// (raw waveforms only when cfg.dump_waveforms is set). Stage failures are
/// rethrown with the stage name prefixed.
PipelineResult run_pipeline(const PipelineConfig& cfg);

// Artifact file names within the output directory.
namespace artifact {
inline constexpr const char* waveforms = "waveforms.csv";
inline constexpr const char* phasors = "phasors.csv";
inline constexpr const char* calibration = "calibration.csv";
inline constexpr const char* model_amplitude = "model_amplitude.pca";
inline constexpr const char* model_phase = "model_phase.pca";
inline constexpr const char* q_full_amplitude = "q_full_amplitude.csv";
inline constexpr const char* q_full_phase = "q_full_phase.csv";
inline constexpr const char* pair_scores = "pair_scores.csv";
inline constexpr const char* triples_amplitude = "triples_amplitude.csv";
inline constexpr const char* triples_phase = "triples_phase.csv";
inline constexpr const char* identification = "identification.csv";
inline constexpr const char* healed = "healed.csv";
inline constexpr const char* train_errors = "train_errors.csv";
inline constexpr const char* test_errors = "test_errors.csv";
inline constexpr const char* summary = "summary.txt";
}  // namespace artifact

std::string artifact_path(const PipelineConfig& cfg, const char* name);

}  // namespace mmu
