#include "mmu/config.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "mmu/csv.hpp"
#include "mmu/errors.hpp"

namespace mmu {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> tokenize(const std::string& s) {
    std::vector<std::string> toks;
    std::istringstream iss(s);
    std::string t;
    while (iss >> t) toks.push_back(t);
    return toks;
}

bool parse_switch(const std::string& v, const std::string& ctx) {
    if (v == "on" || v == "true" || v == "1") return true;
    if (v == "off" || v == "false" || v == "0") return false;
    fail(ctx + ": expected on/off, got '" + v + "'");
}

struct UnitSpec {
    std::string id;
    double radius_m = 0.0, angle_rad = 0.0, alignment = 0.0;
    double gain_v_per_t = 0.0, elec_phase_rad = 0.0;
    double eps0 = 0.0, delta0_rad = 0.0, noise_v_rms = 0.0;
};

struct Parser {
    std::string path;
    PipelineConfig cfg;
    std::vector<UnitSpec> units;
    std::vector<std::pair<double, double>> excite_pts;
    std::map<std::string, PiecewiseLinear> drift_amp, drift_phase;
    long declared_units = -1;
    bool saw_scenario_file = false;

    [[noreturn]] void err(std::size_t lineno, const std::string& msg) const {
        fail(path + ":" + std::to_string(lineno) + ": " + msg);
    }

    std::size_t unit_index(const std::string& id, std::size_t lineno) const {
        for (std::size_t i = 0; i < units.size(); ++i)
            if (units[i].id == id) return i;
        err(lineno, "unknown unit '" + id + "' (unit lines must come first)");
    }

    void parse_unit_line(const std::vector<std::string>& toks, std::size_t lineno) {
        if (toks.size() < 2) err(lineno, "unit line needs an id");
        UnitSpec u;
        u.id = toks[1];
        if (u.id == "REF") err(lineno, "'REF' is reserved for the reference channel");
        for (const auto& existing : units)
            if (existing.id == u.id) err(lineno, "duplicate unit id " + u.id);
        bool saw_radius = false, saw_alignment = false, saw_gain = false;
        for (std::size_t i = 2; i < toks.size(); ++i) {
            const auto eq = toks[i].find('=');
            if (eq == std::string::npos) err(lineno, "expected key=value, got '" + toks[i] + "'");
            const std::string key = toks[i].substr(0, eq);
            const std::string val = toks[i].substr(eq + 1);
            const std::string ctx = path + ":" + std::to_string(lineno) + ": " + key;
            if (key == "radius_m") { u.radius_m = parse_double(val, ctx); saw_radius = true; }
            else if (key == "angle_rad") u.angle_rad = parse_double(val, ctx);
            else if (key == "alignment") { u.alignment = parse_double(val, ctx); saw_alignment = true; }
            else if (key == "gain_v_per_t") { u.gain_v_per_t = parse_double(val, ctx); saw_gain = true; }
            else if (key == "elec_phase_rad") u.elec_phase_rad = parse_double(val, ctx);
            else if (key == "eps0") u.eps0 = parse_double(val, ctx);
            else if (key == "delta0_rad") u.delta0_rad = parse_double(val, ctx);
            else if (key == "noise_v_rms") u.noise_v_rms = parse_double(val, ctx);
            else err(lineno, "unknown unit field '" + key + "'");
        }
        if (!saw_radius || !saw_alignment || !saw_gain)
            err(lineno, "unit line requires radius_m, alignment and gain_v_per_t");
        units.push_back(u);
    }

    void parse_drift_line(const std::vector<std::string>& toks, std::size_t lineno) {
        if (toks.size() < 5) err(lineno, "drift line: need unit, kind and breakpoints");
        const std::string& id = toks[1];
        unit_index(id, lineno);  // existence check
        const std::string& kind = toks[2];
        if (kind != "amp" && kind != "phase")
            err(lineno, "drift kind must be 'amp' or 'phase'");
        if ((toks.size() - 3) % 2 != 0) err(lineno, "drift breakpoints must be t v pairs");
        std::vector<std::pair<double, double>> pts;
        for (std::size_t i = 3; i < toks.size(); i += 2) {
            const std::string ctx = path + ":" + std::to_string(lineno) + ": drift";
            pts.emplace_back(parse_double(toks[i], ctx), parse_double(toks[i + 1], ctx));
        }
        auto& slot = kind == "amp" ? drift_amp : drift_phase;
        if (slot.count(id)) err(lineno, "duplicate drift " + kind + " line for " + id);
        try {
            slot.emplace(id, PiecewiseLinear(std::move(pts)));
        } catch (const Error& e) {
            err(lineno, e.what());
        }
    }

    void parse_key_value(const std::string& key, const std::string& val,
                         std::size_t lineno) {
        const std::string ctx = path + ":" + std::to_string(lineno) + ": " + key;
        auto& sc = cfg.scenario;
        if (key == "name") sc.name = val;
        else if (key == "units") declared_units = parse_long(val, ctx);
        else if (key == "frequency_hz") sc.frequency_hz = parse_double(val, ctx);
        else if (key == "sample_rate_hz") sc.sample_rate_hz = parse_double(val, ctx);
        else if (key == "base_phase_rad") sc.base_phase_rad = parse_double(val, ctx);
        else if (key == "seed") sc.seed = static_cast<std::uint64_t>(parse_long(val, ctx));
        else if (key == "duration_s") sc.duration_s = parse_double(val, ctx);
        else if (key == "calib_end_s") sc.calib_end_s = parse_double(val, ctx);
        else if (key == "train_end_s") sc.train_end_s = parse_double(val, ctx);
        else if (key == "ref_perturb") sc.ref_perturb = parse_switch(val, ctx);
        else if (key == "kappa") cfg.kappa = parse_double(val, ctx);
        else if (key == "alpha") cfg.alpha = parse_double(val, ctx);
        else if (key == "exceedance_rule") cfg.exceedance_rule = parse_double(val, ctx);
        else if (key == "calib_window_s") cfg.calib_window_s = parse_double(val, ctx);
        else if (key == "train_window_s") cfg.train_window_s = parse_double(val, ctx);
        else if (key == "test_window_s") cfg.test_window_s = parse_double(val, ctx);
        else if (key == "calib_max_nonlinearity")
            cfg.calib_max_nonlinearity = parse_double(val, ctx);
        else if (key == "out_dir") cfg.out_dir = val;
        else if (key == "dump_waveforms") cfg.dump_waveforms = parse_switch(val, ctx);
        else if (key == "dump_audit") cfg.dump_audit = parse_switch(val, ctx);
        else if (key == "eq6_rule") {
            if (val == "squared") cfg.rule = VarianceRule::SquaredEigenvalues;
            else if (val == "cumulative") cfg.rule = VarianceRule::Cumulative;
            else err(lineno, "eq6_rule must be 'squared' or 'cumulative'");
        } else if (key == "h0") {
            if (val == "corrected") cfg.h0_as_printed = false;
            else if (val == "printed") cfg.h0_as_printed = true;
            else err(lineno, "h0 must be 'corrected' or 'printed'");
        } else err(lineno, "unknown key '" + key + "'");
    }

    void parse_file(const std::string& file_path, bool allow_scenario_file);
    PipelineConfig finish();
};

void Parser::parse_file(const std::string& file_path, bool allow_scenario_file) {
    std::ifstream in(file_path);
    if (!in) fail("cannot open config: " + file_path);
    const std::string saved_path = path;
    path = file_path;

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;

        auto toks = tokenize(line);
        if (toks[0] == "unit") {
            parse_unit_line(toks, lineno);
            continue;
        }
        if (toks[0] == "excite") {
            if (toks.size() != 3) err(lineno, "excite line: expected 'excite <t_s> <amp_a>'");
            const std::string ctx = path + ":" + std::to_string(lineno) + ": excite";
            excite_pts.emplace_back(parse_double(toks[1], ctx), parse_double(toks[2], ctx));
            continue;
        }
        if (toks[0] == "drift") {
            parse_drift_line(toks, lineno);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            err(lineno, "expected 'key = value' or a unit/excite/drift line");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty()) err(lineno, "malformed key = value line");
        if (key == "scenario_file") {
            if (!allow_scenario_file) err(lineno, "nested scenario_file is not allowed");
            const auto resolved =
                std::filesystem::path(file_path).parent_path() / val;
            saw_scenario_file = true;
            parse_file(resolved.string(), false);
            continue;
        }
        parse_key_value(key, val, lineno);
    }
    path = saved_path;
}

PipelineConfig Parser::finish() {
    if (units.empty()) fail(path + ": no unit lines found");
    if (declared_units >= 0 && declared_units != static_cast<long>(units.size()))
        fail(path + ": 'units' declares " + std::to_string(declared_units) +
             " but " + std::to_string(units.size()) + " unit lines were given");
    if (excite_pts.empty()) fail(path + ": no excite lines found");

    auto& sc = cfg.scenario;
    try {
        sc.excitation_amps = PiecewiseLinear(excite_pts);
    } catch (const Error& e) {
        fail(path + ": excitation profile: " + std::string(e.what()));
    }
    for (auto& [t, amp] : excite_pts)
        if (amp < 0.0) fail(path + ": excitation amplitude must be >= 0");

    for (const auto& u : units) {
        cfg.unit_ids.push_back(u.id);
        sc.geometry.units.push_back({u.radius_m, u.angle_rad, u.alignment});
        sc.gain_v_per_t.push_back(u.gain_v_per_t);
        sc.elec_phase_rad.push_back(u.elec_phase_rad);
        sc.noise_v_rms.push_back(u.noise_v_rms);
        DriftSchedule::UnitDrift d;
        d.eps0 = u.eps0;
        d.delta0 = u.delta0_rad;
        if (auto it = drift_amp.find(u.id); it != drift_amp.end()) d.d_eps = it->second;
        if (auto it = drift_phase.find(u.id); it != drift_phase.end())
            d.d_delta = it->second;
        sc.drift.units.push_back(std::move(d));
    }
    sc.validate();
    cfg.validate();
    return std::move(cfg);
}

}  // namespace

void PipelineConfig::validate() const {
    if (!(kappa > 0.0 && kappa < 1.0)) fail("config: kappa must be in (0, 1)");
    if (!(alpha > 0.5 && alpha < 1.0)) fail("config: alpha must be in (0.5, 1)");
    if (!(exceedance_rule >= 0.0 && exceedance_rule < 1.0))
        fail("config: exceedance_rule must be in [0, 1)");
    if (unit_ids.size() != scenario.unit_count()) fail("config: unit id count mismatch");

    const double fs = scenario.sample_rate_hz;
    const double f = scenario.frequency_hz;
    struct Seg {
        const char* name;
        double length, window;
    } segs[] = {
        {"calibration", scenario.calib_end_s, calib_window_s},
        {"training", scenario.train_end_s - scenario.calib_end_s, train_window_s},
        {"test", scenario.duration_s - scenario.train_end_s, test_window_s},
    };
    for (const auto& seg : segs) {
        if (!(seg.window > 0.0)) fail(std::string("config: ") + seg.name + " window must be > 0");
        const double spw = seg.window * fs;
        if (std::abs(spw - std::round(spw)) > 1e-6)
            fail(std::string("config: ") + seg.name + " window is not a whole number of samples");
        const double cycles = seg.window * f;
        if (std::abs(cycles - std::round(cycles)) > 1e-9 || cycles < 1.0)
            fail(std::string("config: ") + seg.name +
                 " window must span an integer number of signal periods");
        const double count = seg.length / seg.window;
        if (std::abs(count - std::round(count)) > 1e-9)
            fail(std::string("config: ") + seg.name + " segment is not a whole number of windows");
        if (seg.name != std::string("calibration") && std::round(count) < 2.0)
            fail(std::string("config: ") + seg.name + " segment needs at least 2 windows");
    }
}

PipelineConfig load_config(const std::string& path) {
    Parser p;
    p.parse_file(path, true);
    return p.finish();
}

}  // namespace mmu
