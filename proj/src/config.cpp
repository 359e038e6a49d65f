#include "spinqnd/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "spinqnd/csv.hpp"
#include "spinqnd/errors.hpp"
#include "spinqnd/sha256.hpp"

namespace sq::io {

using nlohmann::json;

std::string experiment_name(Experiment e) {
    switch (e) {
        case Experiment::psd: return "psd";
        case Experiment::sweep_strobe: return "sweep_strobe";
        case Experiment::sweep_duty: return "sweep_duty";
        case Experiment::sweep_polarization: return "sweep_polarization";
        case Experiment::optimize_protocol: return "optimize_protocol";
    }
    return "?";
}

namespace {

Experiment experiment_from_name(const std::string& s, const std::string& path) {
    for (Experiment e : {Experiment::psd, Experiment::sweep_strobe,
                         Experiment::sweep_duty, Experiment::sweep_polarization,
                         Experiment::optimize_protocol})
        if (experiment_name(e) == s) return e;
    throw ConfigError(path, "unknown experiment '" + s +
                                "' (expected psd, sweep_strobe, sweep_duty, "
                                "sweep_polarization or optimize_protocol)");
}

// Strict reader: every key of `obj` must be consumed through one of the
// fetchers below; leftovers are reported with their full path.
class ObjectReader {
public:
    ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj.is_object()) throw ConfigError(path_, "expected a JSON object");
    }

    ~ObjectReader() = default;

    double number(const char* key, double fallback) {
        const json* v = take(key);
        if (!v) return fallback;
        if (!v->is_number()) throw ConfigError(join(key), "expected a number");
        return v->get<double>();
    }

    std::uint64_t uinteger(const char* key, std::uint64_t fallback) {
        const json* v = take(key);
        if (!v) return fallback;
        if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0))
            throw ConfigError(join(key), "expected a nonnegative integer");
        return v->get<std::uint64_t>();
    }

    bool boolean(const char* key, bool fallback) {
        const json* v = take(key);
        if (!v) return fallback;
        if (!v->is_boolean()) throw ConfigError(join(key), "expected true or false");
        return v->get<bool>();
    }

    std::string text(const char* key, const std::string& fallback) {
        const json* v = take(key);
        if (!v) return fallback;
        if (!v->is_string()) throw ConfigError(join(key), "expected a string");
        return v->get<std::string>();
    }

    std::vector<double> number_list(const char* key, std::vector<double> fallback) {
        const json* v = take(key);
        if (!v) return fallback;
        if (!v->is_array()) throw ConfigError(join(key), "expected an array of numbers");
        std::vector<double> out;
        for (const auto& e : *v) {
            if (!e.is_number()) throw ConfigError(join(key), "expected an array of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    const json* object(const char* key) { return take(key); }

    void finish() const {
        for (auto it = obj_.begin(); it != obj_.end(); ++it) {
            if (!consumed_.count(it.key()))
                throw ConfigError(join(it.key().c_str()), "unknown key");
        }
    }

    std::string join(const char* key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

private:
    const json* take(const char* key) {
        auto it = obj_.find(key);
        if (it == obj_.end()) return nullptr;
        consumed_.insert(key);
        return &*it;
    }

    const json& obj_;
    std::string path_;
    std::set<std::string> consumed_;
};

RunConfig parse(const json& root) {
    RunConfig cfg;
    ObjectReader top(root, "");

    cfg.seed = top.uinteger("seed", cfg.seed);
    cfg.trajectories =
        static_cast<std::size_t>(top.uinteger("trajectories", cfg.trajectories));
    cfg.experiment = experiment_from_name(
        top.text("experiment", experiment_name(cfg.experiment)), "experiment");
    cfg.output_dir = top.text("output_dir", cfg.output_dir);

    if (const json* o = top.object("ensemble")) {
        ObjectReader r(*o, "ensemble");
        cfg.ensemble.atom.nuclear_spin =
            r.number("nuclear_spin", cfg.ensemble.atom.nuclear_spin);
        cfg.ensemble.n_atoms = r.number("n_atoms", cfg.ensemble.n_atoms);
        cfg.ensemble.p0 = r.number("p0", cfg.ensemble.p0);
        cfg.ensemble.gamma = r.number("gamma_rad_per_s_per_t", cfg.ensemble.gamma);
        cfg.ensemble.r_sd = r.number("r_sd_per_s", cfg.ensemble.r_sd);
        cfg.ensemble.r_se = r.number("r_se_per_s", cfg.ensemble.r_se);
        cfg.ensemble.od = r.number("od", cfg.ensemble.od);
        r.finish();
    }
    if (const json* o = top.object("dynamics")) {
        ObjectReader r(*o, "dynamics");
        cfg.dynamics.f_l = r.number("f_l_hz", cfg.dynamics.f_l);
        cfg.dynamics.dt = r.number("dt_s", cfg.dynamics.dt);
        cfg.dynamics.duration = r.number("duration_s", cfg.dynamics.duration);
        cfg.dynamics.tau_d = r.number("tau_d_s", cfg.dynamics.tau_d);
        cfg.dynamics.ls_strength = r.number("ls_strength", cfg.dynamics.ls_strength);
        cfg.dynamics.pump_hold = r.boolean("pump_hold", cfg.dynamics.pump_hold);
        cfg.dynamics.sample_stride = static_cast<std::size_t>(
            r.uinteger("sample_stride", cfg.dynamics.sample_stride));
        r.finish();
    }
    if (const json* o = top.object("strobe")) {
        ObjectReader r(*o, "strobe");
        cfg.strobe.f_s = r.number("f_s_hz", cfg.strobe.f_s);
        cfg.strobe.duty = r.number("duty", cfg.strobe.duty);
        cfg.strobe.phi0 = r.number("phi0_rad", cfg.strobe.phi0);
        cfg.strobe.avg_flux = r.number("avg_flux_per_s", cfg.strobe.avg_flux);
        r.finish();
    }
    if (const json* o = top.object("polarimeter")) {
        ObjectReader r(*o, "polarimeter");
        cfg.polarimeter.rotation_gain =
            r.number("rotation_gain", cfg.polarimeter.rotation_gain);
        cfg.polarimeter.sample_rate =
            r.number("sample_rate_hz", cfg.polarimeter.sample_rate);
        cfg.polarimeter.psn_floor =
            r.number("psn_floor_rad2_per_hz", cfg.polarimeter.psn_floor);
        r.finish();
    }
    if (const json* o = top.object("analysis")) {
        ObjectReader r(*o, "analysis");
        cfg.analysis.band_lo_hz = r.number("band_lo_hz", cfg.analysis.band_lo_hz);
        cfg.analysis.band_hi_hz = r.number("band_hi_hz", cfg.analysis.band_hi_hz);
        cfg.analysis.segment_len = static_cast<std::size_t>(
            r.uinteger("segment_len", cfg.analysis.segment_len));
        cfg.analysis.emit_trajectory =
            r.boolean("emit_trajectory", cfg.analysis.emit_trajectory);
        r.finish();
    }
    if (const json* o = top.object("sweep")) {
        ObjectReader r(*o, "sweep");
        cfg.sweep.f_s_grid_hz = r.number_list("f_s_grid_hz", cfg.sweep.f_s_grid_hz);
        cfg.sweep.duty_grid = r.number_list("duty_grid", cfg.sweep.duty_grid);
        cfg.sweep.p_grid = r.number_list("p_grid", cfg.sweep.p_grid);
        r.finish();
    }
    if (const json* o = top.object("protocol")) {
        ObjectReader r(*o, "protocol");
        cfg.protocol.total_time_s = r.number("total_time_s", cfg.protocol.total_time_s);
        cfg.protocol.od_grid = r.number_list("od_grid", cfg.protocol.od_grid);
        cfg.protocol.r_se_over_r_sd_grid =
            r.number_list("r_se_over_r_sd_grid", cfg.protocol.r_se_over_r_sd_grid);
        cfg.protocol.p_init = r.number("p_init", cfg.protocol.p_init);
        cfg.protocol.pulse_decoherence =
            r.number("pulse_decoherence", cfg.protocol.pulse_decoherence);
        r.finish();
    }
    top.finish();
    return cfg;
}

void fill_grid_defaults(RunConfig& cfg) {
    if (cfg.sweep.f_s_grid_hz.empty()) {
        for (double f = 2.6e5; f <= 3.4e5 + 1.0; f += 1.0e4)
            cfg.sweep.f_s_grid_hz.push_back(f);
    }
    if (cfg.sweep.duty_grid.empty())
        cfg.sweep.duty_grid = {0.05, 0.1, 0.2, 0.4, 0.8};
    if (cfg.sweep.p_grid.empty()) cfg.sweep.p_grid = {0.0, 0.3, 0.6, 0.9};
    if (cfg.protocol.od_grid.empty())
        cfg.protocol.od_grid = {30.0, 100.0, 300.0, 1000.0, 3000.0, 10000.0};
    if (cfg.protocol.r_se_over_r_sd_grid.empty())
        cfg.protocol.r_se_over_r_sd_grid = {0.0, 10.0, 100.0};
}

} // namespace

RunConfig parse_config_string(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("JSON parse failure: ") + e.what());
    }
    RunConfig cfg = parse(root);
    fill_grid_defaults(cfg);
    return cfg;
}

RunConfig load_config_string(const std::string& json_text) {
    RunConfig cfg = parse_config_string(json_text);
    for (const auto& d : validate_config(cfg))
        if (d.severity == Diagnostic::Severity::error)
            throw ConfigError(d.field_path, d.message);
    return cfg;
}

RunConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("", "cannot open config file " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return load_config_string(ss.str());
}

std::vector<Diagnostic> validate_config(const RunConfig& cfg) {
    std::vector<Diagnostic> out;
    auto error = [&](const std::string& path, const std::string& msg) {
        out.push_back({Diagnostic::Severity::error, path, msg});
    };
    auto warning = [&](const std::string& path, const std::string& msg) {
        out.push_back({Diagnostic::Severity::warning, path, msg});
    };

    if (!cfg.ensemble.atom.valid())
        error("ensemble.nuclear_spin", "must be a positive half-integer (1/2, 1, 3/2, ...)");
    if (!(cfg.ensemble.n_atoms >= 1.0)) error("ensemble.n_atoms", "must be >= 1");
    if (!(cfg.ensemble.p0 >= 0.0 && cfg.ensemble.p0 < 1.0))
        error("ensemble.p0", "must lie in [0, 1)");
    if (!(cfg.ensemble.gamma > 0.0)) error("ensemble.gamma_rad_per_s_per_t", "must be > 0");
    if (!(cfg.ensemble.r_sd > 0.0)) error("ensemble.r_sd_per_s", "must be > 0");
    if (!(cfg.ensemble.r_se >= 0.0)) error("ensemble.r_se_per_s", "must be >= 0");
    if (!(cfg.ensemble.od > 0.0)) error("ensemble.od", "must be > 0");

    if (!(cfg.strobe.f_s > 0.0)) error("strobe.f_s_hz", "must be > 0");
    if (!(cfg.strobe.duty > 0.0 && cfg.strobe.duty <= 1.0))
        error("strobe.duty", "must lie in (0, 1]");
    if (!(cfg.strobe.avg_flux > 0.0)) error("strobe.avg_flux_per_s", "must be > 0");

    if (!(cfg.dynamics.f_l > 0.0)) error("dynamics.f_l_hz", "must be > 0");
    if (!(cfg.dynamics.duration > 0.0)) error("dynamics.duration_s", "must be > 0");
    if (cfg.dynamics.ls_strength < 0.0) error("dynamics.ls_strength", "must be >= 0");
    if (cfg.dynamics.sample_stride < 1) error("dynamics.sample_stride", "must be >= 1");
    if (cfg.dynamics.dt > 0.0 && cfg.dynamics.f_l > 0.0 && cfg.strobe.f_s > 0.0) {
        // An explicit dt must hold for every strobe frequency the run visits.
        double f_s_max = cfg.strobe.f_s;
        if (cfg.experiment == Experiment::sweep_strobe)
            for (double f : cfg.sweep.f_s_grid_hz) f_s_max = std::max(f_s_max, f);
        const double limit = 1.0 / (40.0 * std::max(cfg.dynamics.f_l, f_s_max));
        if (cfg.dynamics.dt > limit * (1.0 + 1e-12))
            error("dynamics.dt_s",
                  "violates the step-size rule dt <= 1/(40 max(f_L, f_s)) = " +
                      format_double(limit) + " s");
    } else if (cfg.dynamics.dt < 0.0) {
        error("dynamics.dt_s", "must be >= 0 (0 selects an automatic step)");
    }

    if (cfg.ensemble.r_sd > 0.0 && cfg.dynamics.duration > 0.0) {
        const double corr_rate = cfg.ensemble.r_sd + cfg.ensemble.r_se +
                                 (cfg.dynamics.tau_d > 0.0 ? 1.0 / cfg.dynamics.tau_d : 0.0);
        if (cfg.dynamics.duration * corr_rate < 10.0)
            warning("dynamics.duration_s",
                    "record spans fewer than 10 atomic correlation times; "
                    "noise-area estimates will be noisy");
    }

    if (!(cfg.polarimeter.rotation_gain >= 0.0))
        error("polarimeter.rotation_gain", "must be >= 0");
    if (cfg.polarimeter.psn_floor < 0.0)
        error("polarimeter.psn_floor_rad2_per_hz", "must be >= 0");
    if (cfg.polarimeter.sample_rate > 0.0 && cfg.dynamics.f_l > 0.0 &&
        cfg.polarimeter.sample_rate < 4.0 * cfg.dynamics.f_l)
        error("polarimeter.sample_rate_hz", "must be >= 4 f_L");

    if (cfg.analysis.segment_len < 8) error("analysis.segment_len", "must be >= 8");
    if (cfg.analysis.band_lo_hz < 0.0 || cfg.analysis.band_hi_hz < 0.0)
        error("analysis.band_lo_hz", "band edges must be >= 0");
    if (cfg.analysis.band_hi_hz > 0.0 && cfg.analysis.band_lo_hz >= cfg.analysis.band_hi_hz)
        error("analysis.band_hi_hz", "band_hi_hz must exceed band_lo_hz");

    auto check_grid = [&](const std::vector<double>& g, const std::string& path,
                          double lo, double hi, bool lo_open) {
        if (g.empty()) error(path, "grid must be nonempty");
        for (double v : g) {
            const bool ok = lo_open ? (v > lo && v <= hi) : (v >= lo && v <= hi);
            if (!ok)
                error(path, "grid value " + format_double(v) + " outside " +
                                (lo_open ? "(" : "[") + format_double(lo) + ", " +
                                format_double(hi) + "]");
        }
    };
    switch (cfg.experiment) {
        case Experiment::sweep_strobe:
            check_grid(cfg.sweep.f_s_grid_hz, "sweep.f_s_grid_hz", 0.0, 1e9, true);
            break;
        case Experiment::sweep_duty:
            check_grid(cfg.sweep.duty_grid, "sweep.duty_grid", 0.0, 1.0, true);
            break;
        case Experiment::sweep_polarization:
            check_grid(cfg.sweep.p_grid, "sweep.p_grid", 0.0, 1.0 - 1e-12, false);
            break;
        case Experiment::optimize_protocol:
            if (!(cfg.protocol.total_time_s > 0.0))
                error("protocol.total_time_s", "must be > 0");
            check_grid(cfg.protocol.od_grid, "protocol.od_grid", 0.0, 1e12, true);
            for (double v : cfg.protocol.r_se_over_r_sd_grid)
                if (v < 0.0) error("protocol.r_se_over_r_sd_grid", "ratios must be >= 0");
            if (cfg.protocol.r_se_over_r_sd_grid.empty())
                error("protocol.r_se_over_r_sd_grid", "grid must be nonempty");
            if (!(cfg.protocol.p_init >= 0.0 && cfg.protocol.p_init <= 1.0))
                error("protocol.p_init", "must lie in [0, 1]");
            if (cfg.protocol.pulse_decoherence < 0.0 || cfg.protocol.pulse_decoherence > 1.0)
                error("protocol.pulse_decoherence", "must lie in [0, 1]");
            break;
        case Experiment::psd:
            break;
    }

    if (cfg.trajectories < 1) error("trajectories", "must be >= 1");
    if (cfg.output_dir.empty()) error("output_dir", "must not be empty");
    return out;
}

std::string effective_config_json(const RunConfig& cfg) {
    json root;
    root["seed"] = cfg.seed;
    root["trajectories"] = cfg.trajectories;
    root["experiment"] = experiment_name(cfg.experiment);
    root["output_dir"] = cfg.output_dir;
    root["ensemble"] = {
        {"nuclear_spin", cfg.ensemble.atom.nuclear_spin},
        {"n_atoms", cfg.ensemble.n_atoms},
        {"p0", cfg.ensemble.p0},
        {"gamma_rad_per_s_per_t", cfg.ensemble.gamma},
        {"r_sd_per_s", cfg.ensemble.r_sd},
        {"r_se_per_s", cfg.ensemble.r_se},
        {"od", cfg.ensemble.od},
    };
    root["dynamics"] = {
        {"f_l_hz", cfg.dynamics.f_l},
        {"dt_s", cfg.dynamics.dt},
        {"duration_s", cfg.dynamics.duration},
        {"tau_d_s", cfg.dynamics.tau_d},
        {"ls_strength", cfg.dynamics.ls_strength},
        {"pump_hold", cfg.dynamics.pump_hold},
        {"sample_stride", cfg.dynamics.sample_stride},
    };
    root["strobe"] = {
        {"f_s_hz", cfg.strobe.f_s},
        {"duty", cfg.strobe.duty},
        {"phi0_rad", cfg.strobe.phi0},
        {"avg_flux_per_s", cfg.strobe.avg_flux},
    };
    root["polarimeter"] = {
        {"rotation_gain", cfg.polarimeter.rotation_gain},
        {"sample_rate_hz", cfg.polarimeter.sample_rate},
        {"psn_floor_rad2_per_hz", cfg.polarimeter.psn_floor},
    };
    root["analysis"] = {
        {"band_lo_hz", cfg.analysis.band_lo_hz},
        {"band_hi_hz", cfg.analysis.band_hi_hz},
        {"segment_len", cfg.analysis.segment_len},
        {"emit_trajectory", cfg.analysis.emit_trajectory},
    };
    root["sweep"] = {
        {"f_s_grid_hz", cfg.sweep.f_s_grid_hz},
        {"duty_grid", cfg.sweep.duty_grid},
        {"p_grid", cfg.sweep.p_grid},
    };
    root["protocol"] = {
        {"total_time_s", cfg.protocol.total_time_s},
        {"od_grid", cfg.protocol.od_grid},
        {"r_se_over_r_sd_grid", cfg.protocol.r_se_over_r_sd_grid},
        {"p_init", cfg.protocol.p_init},
        {"pulse_decoherence", cfg.protocol.pulse_decoherence},
    };
    return root.dump(2) + "\n";
}

std::string config_hash(const RunConfig& cfg) {
    return sha256_hex(effective_config_json(cfg));
}

} // namespace sq::io
