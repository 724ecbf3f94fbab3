#include "mmu/identify.hpp"

#include <algorithm>
#include <numeric>

#include "mmu/errors.hpp"

namespace mmu {

namespace {

void check_pairing(const DataMatrix& train, const DataMatrix& test) {
    if (train.kind != test.kind) fail("identify: train/test kind mismatch");
    if (train.unit_ids != test.unit_ids) fail("identify: train/test unit ids differ");
    if (train.cols() < 3) fail("identify: need at least 3 units");
}

CombinationScore score_subset(const DataMatrix& train, const DataMatrix& test,
                              const std::vector<std::size_t>& idx,
                              std::size_t max_components, const IdentifyOptions& opts) {
    const DataMatrix train_slice = train.select_units(idx);
    const DataMatrix test_slice = test.select_units(idx);
    FitOptions fit_opts;
    fit_opts.rule = opts.rule;
    fit_opts.max_components = max_components;
    const PcaModel model = fit(train_slice, opts.kappa, fit_opts);
    const Mat xbar = normalize_test(test_slice, model);
    const Decomposition dec = decompose(xbar, model);

    CombinationScore score;
    score.subset = train_slice.unit_ids;
    score.kind = train.kind;
    score.q_series.values = q_statistic(dec.residual);
    score.q_series.threshold = q_alpha(model, opts.alpha, opts.q_opts);
    score.q_series.alpha = opts.alpha;
    score.q_series.model_id = std::string(kind_name(train.kind));
    for (const auto& u : score.subset) score.q_series.model_id += "_" + u;
    score.q_sum = std::accumulate(score.q_series.values.begin(),
                                  score.q_series.values.end(), 0.0);
    return score;
}

}  // namespace

std::vector<CombinationScore> score_pairs(const DataMatrix& train,
                                          const DataMatrix& test,
                                          const IdentifyOptions& opts) {
    check_pairing(train, test);
    const std::size_t n = train.cols();
    std::vector<CombinationScore> scores;
    scores.reserve(n * (n - 1) / 2);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
            scores.push_back(score_subset(train, test, {a, b}, 1, opts));
    // Ascending by q_sum; ties keep the pair enumeration order, which is the
    // unit (column) order, so the first minimum is the deterministic winner.
    std::stable_sort(scores.begin(), scores.end(),
                     [](const CombinationScore& x, const CombinationScore& y) {
                         return x.q_sum < y.q_sum;
                     });
    return scores;
}

std::array<std::string, 2> select_reference_pair(
    const std::vector<CombinationScore>& scores) {
    if (scores.empty()) fail("select_reference_pair: no scores");
    const auto& best = scores.front().subset;
    if (best.size() != 2) fail("select_reference_pair: scores are not pairs");
    return {best[0], best[1]};
}

KindReport classify_units(const std::array<std::string, 2>& reference_pair,
                          const DataMatrix& train, const DataMatrix& test,
                          const IdentifyOptions& opts) {
    check_pairing(train, test);
    const std::size_t n = train.cols();
    auto index_of = [&](const std::string& unit) {
        for (std::size_t j = 0; j < n; ++j)
            if (train.unit_ids[j] == unit) return j;
        fail("classify_units: unknown reference unit " + unit);
    };
    const std::size_t p0 = index_of(reference_pair[0]);
    const std::size_t p1 = index_of(reference_pair[1]);
    if (p0 == p1) fail("classify_units: reference pair units must differ");

    KindReport report;
    report.kind = train.kind;
    report.reference_pair = reference_pair;
    report.verdicts.resize(n);

    // Reference-pair units are normal by construction; their displayed
    // exceedance comes from the pair's own 2-column model.
    const CombinationScore pair_score =
        score_subset(train, test, {std::min(p0, p1), std::max(p0, p1)}, 1, opts);
    for (std::size_t j : {p0, p1}) {
        report.verdicts[j].unit = train.unit_ids[j];
        report.verdicts[j].abnormal = false;
        report.verdicts[j].is_reference = true;
        report.verdicts[j].exceed_fraction = pair_score.q_series.exceed_fraction();
    }

    for (std::size_t j = 0; j < n; ++j) {
        if (j == p0 || j == p1) continue;
        std::vector<std::size_t> idx{j, p0, p1};
        std::sort(idx.begin(), idx.end());
        CombinationScore score = score_subset(train, test, idx, 2, opts);
        const double fraction = score.q_series.exceed_fraction();
        report.verdicts[j].unit = train.unit_ids[j];
        report.verdicts[j].abnormal = fraction > opts.exceedance_rule;
        report.verdicts[j].exceed_fraction = fraction;
        report.verdicts[j].is_reference = false;
        report.triple_scores.push_back(std::move(score));
    }
    return report;
}

IdentificationReport identify(const DataMatrix& train_amp, const DataMatrix& test_amp,
                              const DataMatrix& train_phase, const DataMatrix& test_phase,
                              const IdentifyOptions& opts) {
    if (train_amp.unit_ids != train_phase.unit_ids)
        fail("identify: amplitude/phase unit ids differ");

    IdentificationReport report;
    auto run_kind = [&](const DataMatrix& train, const DataMatrix& test) {
        auto scores = score_pairs(train, test, opts);
        auto pair = select_reference_pair(scores);
        KindReport kr = classify_units(pair, train, test, opts);
        kr.pair_scores = std::move(scores);
        return kr;
    };
    report.amplitude = run_kind(train_amp, test_amp);
    report.phase = run_kind(train_phase, test_phase);

    for (std::size_t j = 0; j < train_amp.cols(); ++j) {
        const bool bad = report.amplitude.verdicts[j].abnormal ||
                         report.phase.verdicts[j].abnormal;
        if (bad) report.combined_abnormal.push_back(train_amp.unit_ids[j]);
    }
    return report;
}

}  // namespace mmu
