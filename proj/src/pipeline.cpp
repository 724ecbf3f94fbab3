#include "mmu/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>

#include "mmu/csv.hpp"
#include "mmu/errors.hpp"

namespace mmu {

namespace {

constexpr const char* kKindMmu = "mmu_voltage";
constexpr const char* kKindRef = "ref_current";

std::string fmt6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

struct WindowSpec {
    std::int64_t offset = 0;  // first sample
    std::size_t len = 0;
    double t = 0.0;          // window start, s
    std::size_t segment = 0;  // 0 calib, 1 train, 2 test
};

struct WindowLayout {
    std::vector<WindowSpec> windows;
    std::array<std::size_t, 3> counts{};  // windows per segment
    std::array<std::size_t, 3> spw{};     // samples per window per segment
};

WindowLayout window_layout(const PipelineConfig& cfg) {
    const auto& sc = cfg.scenario;
    const double fs = sc.sample_rate_hz;
    const double seg_start[3] = {0.0, sc.calib_end_s, sc.train_end_s};
    const double seg_len[3] = {sc.calib_end_s, sc.train_end_s - sc.calib_end_s,
                               sc.duration_s - sc.train_end_s};
    const double win_len[3] = {cfg.calib_window_s, cfg.train_window_s, cfg.test_window_s};

    WindowLayout layout;
    std::int64_t offset = 0;
    for (std::size_t seg = 0; seg < 3; ++seg) {
        layout.spw[seg] = static_cast<std::size_t>(std::llround(win_len[seg] * fs));
        layout.counts[seg] = static_cast<std::size_t>(std::llround(seg_len[seg] / win_len[seg]));
        for (std::size_t w = 0; w < layout.counts[seg]; ++w) {
            WindowSpec spec;
            spec.offset = offset;
            spec.len = layout.spw[seg];
            spec.t = seg_start[seg] + static_cast<double>(w) * win_len[seg];
            spec.segment = seg;
            layout.windows.push_back(spec);
            offset += static_cast<std::int64_t>(spec.len);
        }
    }
    if (offset != cfg.scenario.total_samples())
        fail("pipeline: windows do not tile the scenario duration");
    return layout;
}

void perturb_reference(const PipelineConfig& cfg, std::vector<Phasor>& ref) {
    if (!cfg.scenario.ref_perturb) return;
    // Zero-flux-sensor class: 0.01% amplitude, 1e-4 rad phase.
    GaussStream g(cfg.scenario.seed, cfg.scenario.unit_count() + 1);
    for (auto& p : ref) {
        p.amplitude *= 1.0 + 1e-4 * g.next();
        p.phase = wrap_angle(p.phase + 1e-4 * g.next());
    }
}

std::vector<std::string> split_cells(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return cells;
}

}  // namespace

std::string artifact_path(const PipelineConfig& cfg, const char* name) {
    return (std::filesystem::path(cfg.out_dir) / name).string();
}

Segments segment_rows(const PipelineConfig& cfg) {
    const WindowLayout layout = window_layout(cfg);
    Segments s;
    s.calib = {0, layout.counts[0]};
    s.train = {s.calib.end, s.calib.end + layout.counts[1]};
    s.test = {s.train.end, s.train.end + layout.counts[2]};
    return s;
}

DataMatrix data_matrix(const PhasorSet& set, SignalKind kind, SegmentRows rows) {
    if (rows.end > set.rows() || rows.begin > rows.end)
        fail("data_matrix: row range out of bounds");
    const std::size_t n = set.unit_ids.size();
    DataMatrix out;
    out.kind = kind;
    out.unit_ids = set.unit_ids;
    out.values = Mat(rows.count(), n);
    if (kind == SignalKind::Amplitude) {
        for (std::size_t i = 0; i < rows.count(); ++i)
            for (std::size_t j = 0; j < n; ++j)
                out.values(i, j) = set.amp(rows.begin + i, j);
    } else {
        // Unwrap over the whole series so every slice shares one branch.
        std::vector<double> column(set.rows());
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t i = 0; i < set.rows(); ++i) column[i] = set.phase(i, j);
            const std::vector<double> unwrapped = unwrap_phase(column);
            for (std::size_t i = 0; i < rows.count(); ++i)
                out.values(i, j) = unwrapped[rows.begin + i];
        }
    }
    return out;
}

std::pair<DataMatrix, DataMatrix> ingest_phasors(const std::string& path) {
    const PhasorSet set = load_phasors(path);
    const SegmentRows all{0, set.rows()};
    return {data_matrix(set, SignalKind::Amplitude, all),
            data_matrix(set, SignalKind::Phase, all)};
}

// -- persistence --------------------------------------------------------------

void save_phasors(const PhasorSet& set, const std::string& path) {
    const std::vector<std::string> header{"t_s", "unit_id", "amplitude", "phase_rad",
                                          "kind_source"};
    CsvWriter out(path, header);
    for (std::size_t i = 0; i < set.rows(); ++i) {
        const std::string t = format_double(set.t[i]);
        for (std::size_t j = 0; j < set.unit_ids.size(); ++j) {
            out.row(std::vector<std::string>{t, set.unit_ids[j],
                                             format_double(set.amp(i, j)),
                                             format_double(set.phase(i, j)), kKindMmu});
        }
        out.row(std::vector<std::string>{t, "REF", format_double(set.ref[i].amplitude),
                                         format_double(set.ref[i].phase), kKindRef});
    }
    out.close();
}

PhasorSet load_phasors(const std::string& path) {
    const CsvTable table = read_csv(path);
    const std::size_t c_t = table.col("t_s");
    const std::size_t c_unit = table.col("unit_id");
    const std::size_t c_amp = table.col("amplitude");
    const std::size_t c_phase = table.col("phase_rad");
    const std::size_t c_kind = table.col("kind_source");

    struct Rec {
        double t, amp, phase;
        std::string unit, kind;
    };
    std::vector<Rec> recs;
    recs.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string where = path + ":" + std::to_string(r + 2);
        Rec rec;
        rec.t = parse_double(row[c_t], where + ": t_s");
        rec.amp = parse_double(row[c_amp], where + ": amplitude");
        rec.phase = parse_double(row[c_phase], where + ": phase_rad");
        rec.unit = row[c_unit];
        rec.kind = row[c_kind];
        if (rec.kind != kKindMmu && rec.kind != kKindRef)
            fail(where + ": unknown kind_source '" + rec.kind + "'");
        if ((rec.unit == "REF") != (rec.kind == kKindRef))
            fail(where + ": kind_source does not match unit_id");
        recs.push_back(std::move(rec));
    }
    if (recs.empty()) fail(path + ": no phasor rows");

    // Group rows by window start time, preserving encounter order.
    std::vector<double> times;
    for (const auto& rec : recs)
        if (times.empty() || times.back() != rec.t) times.push_back(rec.t);
    for (std::size_t i = 1; i < times.size(); ++i)
        if (times[i] <= times[i - 1]) fail(path + ": t_s must be strictly increasing");

    PhasorSet set;
    set.t = times;
    for (const auto& rec : recs) {
        if (rec.t != times.front()) break;
        if (rec.kind == kKindMmu) set.unit_ids.push_back(rec.unit);
    }
    const std::size_t n = set.unit_ids.size();
    if (n < 3) fail(path + ": need at least 3 units");
    const std::size_t rows = times.size();
    if (recs.size() != rows * (n + 1))
        fail(path + ": expected " + std::to_string(rows * (n + 1)) + " rows (" +
             std::to_string(rows) + " windows x " + std::to_string(n + 1) +
             " channels), got " + std::to_string(recs.size()));

    set.amp = Mat(rows, n);
    set.phase = Mat(rows, n);
    set.ref.resize(rows);
    std::vector<bool> have_ref(rows, false);
    Mat have(rows, n);
    std::size_t window = 0;
    for (const auto& rec : recs) {
        if (rec.t != times[window]) {
            ++window;
            if (window >= rows || rec.t != times[window])
                fail(path + ": rows are not grouped by t_s");
        }
        if (rec.kind == kKindRef) {
            if (have_ref[window]) fail(path + ": duplicate REF row in a window");
            set.ref[window] = make_phasor(rec.amp, rec.phase);
            have_ref[window] = true;
            continue;
        }
        const auto it = std::find(set.unit_ids.begin(), set.unit_ids.end(), rec.unit);
        if (it == set.unit_ids.end())
            fail(path + ": unit " + rec.unit + " absent from the first window");
        const std::size_t j = static_cast<std::size_t>(it - set.unit_ids.begin());
        if (have(window, j) != 0.0)
            fail(path + ": duplicate row for unit " + rec.unit + " in a window");
        have(window, j) = 1.0;
        if (!(rec.amp >= 0.0)) fail(path + ": negative amplitude for unit " + rec.unit);
        set.amp(window, j) = rec.amp;
        set.phase(window, j) = rec.phase;
    }
    for (std::size_t i = 0; i < rows; ++i) {
        if (!have_ref[i]) fail(path + ": missing REF row in a window");
        for (std::size_t j = 0; j < n; ++j)
            if (have(i, j) == 0.0)
                fail(path + ": missing unit " + set.unit_ids[j] + " in a window");
    }
    return set;
}

void save_calibration(const CalibrationTable& table, const std::string& path) {
    const std::vector<std::string> header{"unit", "xi_a_per_v", "phi_rad",
                                          "nonlinearity", "phase_std_rad"};
    CsvWriter out(path, header);
    for (const auto& r : table.rows)
        out.row(std::vector<std::string>{r.unit_id, format_double(r.xi),
                                         format_double(r.phi),
                                         format_double(r.nonlinearity),
                                         format_double(r.phase_std)});
    out.close();
}

CalibrationTable load_calibration(const std::string& path) {
    const CsvTable table = read_csv(path);
    const std::size_t c_unit = table.col("unit");
    const std::size_t c_xi = table.col("xi_a_per_v");
    const std::size_t c_phi = table.col("phi_rad");
    const std::size_t c_nl = table.col("nonlinearity");
    const std::size_t c_ps = table.col("phase_std_rad");
    CalibrationTable out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string where = path + ":" + std::to_string(r + 2);
        CalibrationRow c;
        c.unit_id = row[c_unit];
        c.xi = parse_double(row[c_xi], where + ": xi");
        c.phi = parse_double(row[c_phi], where + ": phi");
        c.nonlinearity = parse_double(row[c_nl], where + ": nonlinearity");
        c.phase_std = parse_double(row[c_ps], where + ": phase_std");
        out.rows.push_back(std::move(c));
    }
    if (out.rows.empty()) fail(path + ": empty calibration table");
    return out;
}

void save_q_series(const QSeries& q, const std::string& path) {
    const std::vector<std::string> header{"row", "q", "threshold", "exceeded"};
    CsvWriter out(path, header);
    for (std::size_t i = 0; i < q.values.size(); ++i)
        out.row(std::vector<std::string>{std::to_string(i), format_double(q.values[i]),
                                         format_double(q.threshold),
                                         q.values[i] > q.threshold ? "1" : "0"});
    out.close();
}

void save_identification(const IdentificationReport& report, const std::string& path) {
    const std::vector<std::string> header{"kind", "unit", "verdict", "exceed_fraction",
                                          "is_reference"};
    CsvWriter out(path, header);
    auto emit = [&](const KindReport& kr) {
        for (const auto& v : kr.verdicts)
            out.row(std::vector<std::string>{
                std::string(kind_name(kr.kind)), v.unit,
                v.abnormal ? "abnormal" : "normal", format_double(v.exceed_fraction),
                v.is_reference ? "1" : "0"});
    };
    emit(report.amplitude);
    emit(report.phase);
    out.close();
}

IdentificationReport load_identification(const std::string& path) {
    const CsvTable table = read_csv(path);
    const std::size_t c_kind = table.col("kind");
    const std::size_t c_unit = table.col("unit");
    const std::size_t c_verdict = table.col("verdict");
    const std::size_t c_frac = table.col("exceed_fraction");
    const std::size_t c_ref = table.col("is_reference");

    IdentificationReport report;
    report.amplitude.kind = SignalKind::Amplitude;
    report.phase.kind = SignalKind::Phase;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string where = path + ":" + std::to_string(r + 2);
        UnitVerdict v;
        v.unit = row[c_unit];
        if (row[c_verdict] == "abnormal") v.abnormal = true;
        else if (row[c_verdict] == "normal") v.abnormal = false;
        else fail(where + ": unknown verdict '" + row[c_verdict] + "'");
        v.exceed_fraction = parse_double(row[c_frac], where + ": exceed_fraction");
        v.is_reference = row[c_ref] == "1";
        if (row[c_kind] == "amplitude") report.amplitude.verdicts.push_back(v);
        else if (row[c_kind] == "phase") report.phase.verdicts.push_back(v);
        else fail(where + ": unknown kind '" + row[c_kind] + "'");
    }
    auto fill_pair = [&](KindReport& kr) {
        std::vector<std::string> refs;
        for (const auto& v : kr.verdicts)
            if (v.is_reference) refs.push_back(v.unit);
        if (refs.size() != 2) fail(path + ": expected exactly 2 reference units per kind");
        kr.reference_pair = {refs[0], refs[1]};
    };
    fill_pair(report.amplitude);
    fill_pair(report.phase);
    for (const auto& v : report.amplitude.verdicts) {
        bool bad = v.abnormal;
        for (const auto& p : report.phase.verdicts)
            if (p.unit == v.unit && p.abnormal) bad = true;
        if (bad) report.combined_abnormal.push_back(v.unit);
    }
    return report;
}

void save_healed(const HealedEstimate& h, const std::string& path) {
    const std::vector<std::string> header{
        "t_s",        "conv_amp_a",   "conv_phase_rad", "healed_amp_a",
        "healed_phase_rad", "ref_amp_a", "ref_phase_rad",  "eps_a_conv",
        "eps_p_conv_rad",   "eps_a_healed", "eps_p_healed_rad"};
    CsvWriter out(path, header);
    for (std::size_t i = 0; i < h.t.size(); ++i)
        out.row(std::vector<std::string>{
            format_double(h.t[i]), format_double(h.conventional[i].amplitude),
            format_double(h.conventional[i].phase), format_double(h.healed[i].amplitude),
            format_double(h.healed[i].phase), format_double(h.reference[i].amplitude),
            format_double(h.reference[i].phase), format_double(h.eps_a_conventional[i]),
            format_double(h.eps_p_conventional[i]), format_double(h.eps_a_healed[i]),
            format_double(h.eps_p_healed[i])});
    out.close();
}

HealedEstimate load_healed(const std::string& path) {
    const CsvTable table = read_csv(path);
    auto col = [&](const char* name) { return table.col(name); };
    const std::size_t c_t = col("t_s"), c_ca = col("conv_amp_a"),
                      c_cp = col("conv_phase_rad"), c_ha = col("healed_amp_a"),
                      c_hp = col("healed_phase_rad"), c_ra = col("ref_amp_a"),
                      c_rp = col("ref_phase_rad"), c_eac = col("eps_a_conv"),
                      c_epc = col("eps_p_conv_rad"), c_eah = col("eps_a_healed"),
                      c_eph = col("eps_p_healed_rad");
    HealedEstimate h;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string where = path + ":" + std::to_string(r + 2);
        auto get = [&](std::size_t c) { return parse_double(row[c], where); };
        h.t.push_back(get(c_t));
        h.conventional.push_back(make_phasor(get(c_ca), get(c_cp)));
        h.healed.push_back(make_phasor(get(c_ha), get(c_hp)));
        h.reference.push_back(make_phasor(get(c_ra), get(c_rp)));
        h.eps_a_conventional.push_back(get(c_eac));
        h.eps_p_conventional.push_back(get(c_epc));
        h.eps_a_healed.push_back(get(c_eah));
        h.eps_p_healed.push_back(get(c_eph));
    }
    return h;
}

// -- stages --------------------------------------------------------------------

void stage_simulate(const PipelineConfig& cfg) {
    const auto& sc = cfg.scenario;
    const std::size_t n = sc.unit_count();
    const double fs = sc.sample_rate_hz;
    const WindowLayout layout = window_layout(cfg);

    std::vector<std::string> header{"t_s", "ref_a"};
    for (const auto& u : cfg.unit_ids) header.push_back(u);
    CsvWriter out(artifact_path(cfg, artifact::waveforms), header);

    std::vector<std::unique_ptr<ChannelStream>> streams;
    for (std::size_t c = 0; c <= n; ++c)
        streams.push_back(std::make_unique<ChannelStream>(sc, c));

    std::vector<std::vector<double>> buf(n + 1);
    std::vector<std::string> cells(n + 2);
    for (const WindowSpec& w : layout.windows) {
        for (std::size_t c = 0; c <= n; ++c) {
            buf[c].resize(w.len);
            streams[c]->next(buf[c]);
        }
        for (std::size_t j = 0; j < w.len; ++j) {
            const double t = static_cast<double>(w.offset + static_cast<std::int64_t>(j)) / fs;
            cells[0] = format_double(t);
            cells[1] = format_double(buf[n][j]);
            for (std::size_t c = 0; c < n; ++c) cells[2 + c] = format_double(buf[c][j]);
            out.row(cells);
        }
    }
    out.close();
}

namespace {

PhasorSet extract_common(const PipelineConfig& cfg,
                         const std::function<void(std::size_t, const WindowSpec&,
                                                  std::vector<double>&)>& fill_window) {
    const auto& sc = cfg.scenario;
    const std::size_t n = sc.unit_count();
    const WindowLayout layout = window_layout(cfg);
    std::array<std::unique_ptr<LockInPlan>, 3> plans;
    for (std::size_t seg = 0; seg < 3; ++seg)
        if (layout.counts[seg] > 0)
            plans[seg] = std::make_unique<LockInPlan>(sc.frequency_hz, sc.sample_rate_hz,
                                                      layout.spw[seg]);

    PhasorSet set;
    set.unit_ids = cfg.unit_ids;
    set.t.reserve(layout.windows.size());
    for (const auto& w : layout.windows) set.t.push_back(w.t);
    set.amp = Mat(layout.windows.size(), n);
    set.phase = Mat(layout.windows.size(), n);
    set.ref.resize(layout.windows.size());

    std::vector<double> buf;
    for (std::size_t c = 0; c <= n; ++c) {
        for (std::size_t i = 0; i < layout.windows.size(); ++i) {
            const WindowSpec& w = layout.windows[i];
            buf.resize(w.len);
            fill_window(c, w, buf);
            const SampledWindow window{std::span<const double>(buf), sc.sample_rate_hz,
                                       w.t};
            const Phasor p = plans[w.segment]->extract(window);
            if (c < n) {
                set.amp(i, c) = p.amplitude;
                set.phase(i, c) = p.phase;
            } else {
                set.ref[i] = p;
            }
        }
    }
    perturb_reference(cfg, set.ref);
    return set;
}

}  // namespace

PhasorSet stage_extract_synth(const PipelineConfig& cfg) {
    const std::size_t n = cfg.scenario.unit_count();
    std::vector<std::unique_ptr<ChannelStream>> streams;
    for (std::size_t c = 0; c <= n; ++c)
        streams.push_back(std::make_unique<ChannelStream>(cfg.scenario, c));
    return extract_common(
        cfg, [&](std::size_t c, const WindowSpec&, std::vector<double>& buf) {
            streams[c]->next(buf);
        });
}

PhasorSet stage_extract_from_waveforms(const PipelineConfig& cfg,
                                       const std::string& waveforms_csv) {
    const std::size_t n = cfg.scenario.unit_count();
    const std::int64_t total = cfg.scenario.total_samples();

    std::ifstream in(waveforms_csv, std::ios::binary);
    if (!in) fail("cannot open: " + waveforms_csv);
    std::string line;
    if (!std::getline(in, line)) fail(waveforms_csv + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_cells(line);
    auto col_of = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        fail(waveforms_csv + ": missing column '" + name + "'");
    };
    std::vector<std::size_t> channel_col(n + 1);
    for (std::size_t c = 0; c < n; ++c) channel_col[c] = col_of(cfg.unit_ids[c]);
    channel_col[n] = col_of("ref_a");

    std::vector<std::vector<double>> channels(n + 1);
    for (auto& ch : channels) ch.reserve(static_cast<std::size_t>(total));
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_cells(line);
        if (cells.size() != header.size())
            fail(waveforms_csv + ":" + std::to_string(lineno) + ": ragged row");
        const std::string where = waveforms_csv + ":" + std::to_string(lineno);
        for (std::size_t c = 0; c <= n; ++c)
            channels[c].push_back(parse_double(cells[channel_col[c]], where));
    }
    if (static_cast<std::int64_t>(channels[0].size()) != total)
        fail(waveforms_csv + ": expected " + std::to_string(total) + " sample rows, got " +
             std::to_string(channels[0].size()));

    return extract_common(
        cfg, [&](std::size_t c, const WindowSpec& w, std::vector<double>& buf) {
            const auto* src = channels[c].data() + w.offset;
            std::copy(src, src + w.len, buf.begin());
        });
}

CalibrationTable stage_calibrate(const PipelineConfig& cfg, const PhasorSet& set) {
    const Segments segs = segment_rows(cfg);
    if (segs.calib.count() < 2)
        fail("calibration segment has fewer than 2 windows; set calib_end_s");
    const std::size_t n = set.unit_ids.size();

    std::vector<Phasor> ref(set.ref.begin() + static_cast<std::ptrdiff_t>(segs.calib.begin),
                            set.ref.begin() + static_cast<std::ptrdiff_t>(segs.calib.end));
    CalibrationLimits limits;
    limits.max_nonlinearity = cfg.calib_max_nonlinearity;

    CalibrationTable table;
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<Phasor> unit(segs.calib.count());
        for (std::size_t i = 0; i < unit.size(); ++i)
            unit[i] = make_phasor(set.amp(segs.calib.begin + i, j),
                                  set.phase(segs.calib.begin + i, j));
        table.rows.push_back(calibrate(set.unit_ids[j], unit, ref, limits));
    }
    return table;
}

TrainedModels stage_train(const PipelineConfig& cfg, const PhasorSet& set) {
    const Segments segs = segment_rows(cfg);
    FitOptions opts;
    opts.rule = cfg.rule;
    TrainedModels models;
    models.amplitude = fit(data_matrix(set, SignalKind::Amplitude, segs.train), cfg.kappa, opts);
    models.phase = fit(data_matrix(set, SignalKind::Phase, segs.train), cfg.kappa, opts);
    return models;
}

MonitorResult stage_monitor(const PipelineConfig& cfg, const PhasorSet& set,
                            const TrainedModels& models) {
    const Segments segs = segment_rows(cfg);
    QAlphaOptions qopts;
    qopts.h0_as_printed = cfg.h0_as_printed;
    MonitorResult result;
    auto run = [&](const PcaModel& model, SignalKind kind) {
        const DataMatrix test = data_matrix(set, kind, segs.test);
        const Mat xbar = normalize_test(test, model);
        const Decomposition dec = decompose(xbar, model);
        QSeries q;
        q.values = q_statistic(dec.residual);
        q.threshold = q_alpha(model, cfg.alpha, qopts);
        q.alpha = cfg.alpha;
        q.model_id = std::string("full_") + std::string(kind_name(kind));
        return q;
    };
    result.amplitude = run(models.amplitude, SignalKind::Amplitude);
    result.phase = run(models.phase, SignalKind::Phase);
    return result;
}

IdentificationReport stage_identify(const PipelineConfig& cfg, const PhasorSet& set) {
    const Segments segs = segment_rows(cfg);
    IdentifyOptions opts;
    opts.kappa = cfg.kappa;
    opts.alpha = cfg.alpha;
    opts.exceedance_rule = cfg.exceedance_rule;
    opts.rule = cfg.rule;
    opts.q_opts.h0_as_printed = cfg.h0_as_printed;
    return identify(data_matrix(set, SignalKind::Amplitude, segs.train),
                    data_matrix(set, SignalKind::Amplitude, segs.test),
                    data_matrix(set, SignalKind::Phase, segs.train),
                    data_matrix(set, SignalKind::Phase, segs.test), opts);
}

HealedEstimate stage_heal(const PipelineConfig& cfg, const PhasorSet& set,
                          const CalibrationTable& table,
                          const std::vector<std::string>& excluded) {
    const Segments segs = segment_rows(cfg);
    const std::size_t n = set.unit_ids.size();

    std::vector<std::string> included;
    for (const auto& u : set.unit_ids)
        if (std::find(excluded.begin(), excluded.end(), u) == excluded.end())
            included.push_back(u);
    if (included.empty())
        fail("heal: every unit is excluded; cannot form a current estimate");

    std::vector<Phasor> conventional, healed, reference;
    std::vector<double> t;
    std::vector<Phasor> units(n);
    for (std::size_t i = segs.test.begin; i < segs.test.end; ++i) {
        for (std::size_t j = 0; j < n; ++j)
            units[j] = make_phasor(set.amp(i, j), set.phase(i, j));
        conventional.push_back(estimate_current(units, set.unit_ids, table, set.unit_ids));
        healed.push_back(estimate_current(units, set.unit_ids, table, included));
        reference.push_back(set.ref[i]);
        t.push_back(set.t[i]);
    }
    return compare(conventional, healed, reference, t, excluded);
}

namespace {

void write_errors_csv(const std::string& path, const PhasorSet& set,
                      const CalibrationTable& table, SegmentRows rows) {
    const std::vector<std::string> header{"t_s",      "unit_id",     "amplitude",
                                          "phase_rad", "rel_amp_err", "phase_err_rad"};
    CsvWriter out(path, header);
    for (std::size_t i = rows.begin; i < rows.end; ++i) {
        for (std::size_t j = 0; j < set.unit_ids.size(); ++j) {
            const Phasor measured = make_phasor(set.amp(i, j), set.phase(i, j));
            const Phasor expected = reference_phasor(table.by_unit(set.unit_ids[j]),
                                                     set.ref[i]);
            const UnitErrors err = unit_errors(measured, expected);
            out.row(std::vector<std::string>{
                format_double(set.t[i]), set.unit_ids[j], format_double(measured.amplitude),
                format_double(measured.phase), format_double(err.rel_amplitude),
                format_double(err.phase)});
        }
    }
    out.close();
}

}  // namespace

void stage_report(const PipelineConfig& cfg, const PhasorSet& set,
                  const CalibrationTable& table, const IdentificationReport& report,
                  const HealedEstimate& healed) {
    const Segments segs = segment_rows(cfg);
    write_errors_csv(artifact_path(cfg, artifact::train_errors), set, table, segs.train);
    write_errors_csv(artifact_path(cfg, artifact::test_errors), set, table, segs.test);

    std::ostringstream s;
    s << "mmuheal run summary\n";
    s << "scenario: " << cfg.scenario.name << "\n";
    s << "units:";
    for (const auto& u : set.unit_ids) s << ' ' << u;
    s << "\n";
    s << "windows: calib " << segs.calib.count() << " x " << fmt6(cfg.calib_window_s)
      << " s, train " << segs.train.count() << " x " << fmt6(cfg.train_window_s)
      << " s, test " << segs.test.count() << " x " << fmt6(cfg.test_window_s) << " s\n";
    s << "kappa " << fmt6(cfg.kappa) << ", alpha " << fmt6(cfg.alpha)
      << ", exceedance rule " << fmt6(cfg.exceedance_rule) << "\n\n";

    s << "calibration (unit, xi A/V, phi rad, nonlinearity, phase std rad, intercept A):\n";
    for (const auto& r : table.rows)
        s << "  " << r.unit_id << "  " << fmt6(r.xi) << "  " << fmt6(r.phi) << "  "
          << fmt6(r.nonlinearity) << "  " << fmt6(r.phase_std) << "  "
          << fmt6(r.intercept) << "\n";
    s << "\n";

    auto emit_kind = [&](const KindReport& kr) {
        s << kind_name(kr.kind) << " reference pair: " << kr.reference_pair[0] << " "
          << kr.reference_pair[1] << "\n";
        s << kind_name(kr.kind) << " verdicts (unit, verdict, exceedance):\n";
        for (const auto& v : kr.verdicts)
            s << "  " << v.unit << "  " << (v.abnormal ? "abnormal" : "normal") << "  "
              << fmt6(v.exceed_fraction) << (v.is_reference ? "  (reference)" : "")
              << "\n";
    };
    emit_kind(report.amplitude);
    emit_kind(report.phase);
    s << "combined abnormal set:";
    if (report.combined_abnormal.empty()) s << " (none)";
    for (const auto& u : report.combined_abnormal) s << ' ' << u;
    s << "\n\n";

    auto worst = [](const std::vector<double>& v) {
        double w = 0.0;
        for (double x : v) w = std::max(w, std::abs(x));
        return w;
    };
    s << "healing (excluded:";
    if (healed.excluded.empty()) s << " none";
    for (const auto& u : healed.excluded) s << ' ' << u;
    s << ")\n";
    s << "  conventional worst |eps_A| = " << fmt6(worst(healed.eps_a_conventional))
      << ", worst |eps_P| = " << fmt6(worst(healed.eps_p_conventional)) << " rad\n";
    s << "  healed       worst |eps_A| = " << fmt6(worst(healed.eps_a_healed))
      << ", worst |eps_P| = " << fmt6(worst(healed.eps_p_healed)) << " rad\n";

    std::ofstream out(artifact_path(cfg, artifact::summary), std::ios::binary);
    if (!out) fail("cannot open for writing: " + artifact_path(cfg, artifact::summary));
    out << s.str();
    out.close();
    if (!out) fail("write failed: " + artifact_path(cfg, artifact::summary));
}

void save_pair_scores(const IdentificationReport& report, const std::string& path) {
    const std::vector<std::string> header{"kind", "unit_a", "unit_b", "q_sum",
                                          "threshold"};
    CsvWriter out(path, header);
    auto emit = [&](const KindReport& kr) {
        for (const auto& s : kr.pair_scores)
            out.row(std::vector<std::string>{std::string(kind_name(kr.kind)), s.subset[0],
                                             s.subset[1], format_double(s.q_sum),
                                             format_double(s.q_series.threshold)});
    };
    emit(report.amplitude);
    emit(report.phase);
    out.close();
}

void save_triples(const KindReport& kr, const std::string& path) {
    const std::vector<std::string> header{"unit", "row", "q", "threshold", "exceeded"};
    CsvWriter out(path, header);
    for (const auto& score : kr.triple_scores) {
        // The classified unit is the one that is not in the reference pair.
        std::string unit;
        for (const auto& u : score.subset)
            if (u != kr.reference_pair[0] && u != kr.reference_pair[1]) unit = u;
        for (std::size_t i = 0; i < score.q_series.values.size(); ++i)
            out.row(std::vector<std::string>{
                unit, std::to_string(i), format_double(score.q_series.values[i]),
                format_double(score.q_series.threshold),
                score.q_series.values[i] > score.q_series.threshold ? "1" : "0"});
    }
    out.close();
}

namespace {

void save_audit(const IdentificationReport& report, const std::string& dir) {
    std::filesystem::create_directories(dir);
    auto emit = [&](const std::vector<CombinationScore>& scores) {
        for (const auto& s : scores) {
            std::string name = std::string(kind_name(s.kind));
            for (const auto& u : s.subset) name += "_" + u;
            save_q_series(s.q_series, (std::filesystem::path(dir) / (name + ".csv")).string());
        }
    };
    emit(report.amplitude.pair_scores);
    emit(report.amplitude.triple_scores);
    emit(report.phase.pair_scores);
    emit(report.phase.triple_scores);
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);

    auto staged = [](const char* stage, auto&& fn) {
        try {
            return fn();
        } catch (const Error&) {
            throw;
        } catch (const std::exception& e) {
            fail(std::string("stage ") + stage + ": " + e.what());
        }
    };

    if (cfg.dump_waveforms) stage_simulate(cfg);

    PhasorSet set = staged("extract", [&] { return stage_extract_synth(cfg); });
    save_phasors(set, artifact_path(cfg, artifact::phasors));

    PipelineResult result;
    result.calibration = staged("calibrate", [&] { return stage_calibrate(cfg, set); });
    save_calibration(result.calibration, artifact_path(cfg, artifact::calibration));

    const TrainedModels models = staged("train", [&] { return stage_train(cfg, set); });
    save_model(models.amplitude, artifact_path(cfg, artifact::model_amplitude));
    save_model(models.phase, artifact_path(cfg, artifact::model_phase));

    const MonitorResult monitor =
        staged("monitor", [&] { return stage_monitor(cfg, set, models); });
    save_q_series(monitor.amplitude, artifact_path(cfg, artifact::q_full_amplitude));
    save_q_series(monitor.phase, artifact_path(cfg, artifact::q_full_phase));

    result.identification = staged("identify", [&] { return stage_identify(cfg, set); });
    save_pair_scores(result.identification, artifact_path(cfg, artifact::pair_scores));
    save_triples(result.identification.amplitude,
                 artifact_path(cfg, artifact::triples_amplitude));
    save_triples(result.identification.phase, artifact_path(cfg, artifact::triples_phase));
    save_identification(result.identification, artifact_path(cfg, artifact::identification));
    if (cfg.dump_audit)
        save_audit(result.identification,
                   (std::filesystem::path(cfg.out_dir) / "audit").string());

    result.healed = staged("heal", [&] {
        return stage_heal(cfg, set, result.calibration,
                          result.identification.combined_abnormal);
    });
    save_healed(result.healed, artifact_path(cfg, artifact::healed));

    staged("report", [&] {
        stage_report(cfg, set, result.calibration, result.identification, result.healed);
        return 0;
    });
    return result;
}

}  // namespace mmu
