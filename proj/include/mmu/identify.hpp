#pragma once

#include <array>
#include <string>
#include <vector>

#include "mmu/pca.hpp"
#include "mmu/spe.hpp"

namespace mmu {

struct CombinationScore {
    std::vector<std::string> subset;  // unit ids in column order, size 2 or 3
    SignalKind kind = SignalKind::Amplitude;
    double q_sum = 0.0;  // sum of the Q series over all test rows
    QSeries q_series;
};

struct UnitVerdict {
    std::string unit;
    bool abnormal = false;
    double exceed_fraction = 0.0;
    bool is_reference = false;
};

struct KindReport {
    SignalKind kind = SignalKind::Amplitude;
    std::array<std::string, 2> reference_pair;
    std::vector<UnitVerdict> verdicts;            // one per unit, column order
    std::vector<CombinationScore> pair_scores;    // ascending q_sum
    std::vector<CombinationScore> triple_scores;  // one per non-reference unit
};

struct IdentificationReport {
    KindReport amplitude;
    KindReport phase;
    std::vector<std::string> combined_abnormal;  // union over kinds, column order
};

struct IdentifyOptions {
    double kappa = 0.85;
    double alpha = 0.99;
    double exceedance_rule = 0.05;  // abnormal iff exceed fraction > this
    VarianceRule rule = VarianceRule::SquaredEigenvalues;
    QAlphaOptions q_opts;
};

/// Step 1: every pairwise combination gets its own 2-column model (m forced
/// to 1) trained on the training slice; the test slice's Q series is summed.
/// Returned ascending by q_sum, ties broken by unit order.
std::vector<CombinationScore> score_pairs(const DataMatrix& train,
                                          const DataMatrix& test,
                                          const IdentifyOptions& opts);

/// The subset of the minimal score (scores as returned by score_pairs).
std::array<std::string, 2> select_reference_pair(
    const std::vector<CombinationScore>& scores);

/// Step 2: each remaining unit joins the reference pair in a 3-column model
/// (m capped at 2); a unit is abnormal when its Q series exceeds the model's
/// own threshold more often than the exceedance rule allows.
KindReport classify_units(const std::array<std::string, 2>& reference_pair,
                          const DataMatrix& train, const DataMatrix& test,
                          const IdentifyOptions& opts);

/// Both kinds end to end; the combined abnormal set is the union.
IdentificationReport identify(const DataMatrix& train_amp, const DataMatrix& test_amp,
                              const DataMatrix& train_phase, const DataMatrix& test_phase,
                              const IdentifyOptions& opts);

}  // namespace mmu
