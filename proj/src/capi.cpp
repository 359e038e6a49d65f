#include "spinqnd.h"

#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <sstream>
#include <string>

#include "spinqnd/config.hpp"
#include "spinqnd/errors.hpp"
#include "spinqnd/experiments.hpp"
#include "spinqnd/plotdata.hpp"
#include "spinqnd/qnd_protocol.hpp"
#include "spinqnd/spin_model.hpp"
#include "spinqnd/version.hpp"

struct sq_config {
    sq::io::RunConfig cfg;
};

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& msg) { g_last_error = msg; }

char* dup_string(const std::string& s) {
    char* out = new (std::nothrow) char[s.size() + 1];
    if (!out) return nullptr;
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

// Translates the C++ error idiom into status codes at the boundary.
template <typename Fn>
sq_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return SQ_OK;
    } catch (const sq::ConfigError& e) {
        set_error(e.what());
        return SQ_ERR_CONFIG;
    } catch (const sq::NumericError& e) {
        set_error(e.what());
        return SQ_ERR_NUMERIC;
    } catch (const std::domain_error& e) {
        set_error(e.what());
        return SQ_ERR_INVALID_ARG;
    } catch (const std::invalid_argument& e) {
        set_error(e.what());
        return SQ_ERR_INVALID_ARG;
    } catch (const std::exception& e) {
        set_error(e.what());
        return SQ_ERR_INTERNAL;
    } catch (...) {
        set_error("unknown failure");
        return SQ_ERR_INTERNAL;
    }
}

sq_status invalid(const char* msg) {
    set_error(msg);
    return SQ_ERR_INVALID_ARG;
}

sq::qnd::ProtocolParams to_protocol_params(const sq_protocol_params& p) {
    sq::qnd::ProtocolParams out;
    out.n_atoms = p.n_atoms;
    out.gamma = p.gamma;
    out.r_sd = p.r_sd;
    out.r_se = p.r_se;
    out.od = p.od;
    out.p_init = p.p_init;
    out.pulse_decoherence = p.pulse_decoherence;
    return out;
}

} // namespace

extern "C" {

const char* sq_version(void) { return sq::kVersion; }

const char* sq_last_error(void) { return g_last_error.c_str(); }

void sq_string_free(char* s) { delete[] s; }

sq_status sq_config_load_file(const char* path, sq_config** out) {
    if (!path || !out) return invalid("null argument");
    *out = nullptr;
    return guarded([&] {
        auto cfg = std::make_unique<sq_config>();
        cfg->cfg = sq::io::load_config_file(path);
        *out = cfg.release();
    });
}

sq_status sq_config_load_string(const char* json_text, sq_config** out) {
    if (!json_text || !out) return invalid("null argument");
    *out = nullptr;
    return guarded([&] {
        auto cfg = std::make_unique<sq_config>();
        cfg->cfg = sq::io::load_config_string(json_text);
        *out = cfg.release();
    });
}

void sq_config_free(sq_config* cfg) { delete cfg; }

sq_status sq_config_effective_json(const sq_config* cfg, char** json_out) {
    if (!cfg || !json_out) return invalid("null argument");
    return guarded([&] { *json_out = dup_string(sq::io::effective_config_json(cfg->cfg)); });
}

sq_status sq_config_validate_file(const char* path, char** diagnostics_out) {
    if (!path) return invalid("null argument");
    if (diagnostics_out) *diagnostics_out = nullptr;
    std::string report;
    bool failed = false;
    const sq_status st = guarded([&] {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw sq::ConfigError("", std::string("cannot open config file ") + path);
        std::stringstream ss;
        ss << f.rdbuf();
        // Lenient parse so every invariant violation is listed, not just the
        // first; structural problems (bad JSON, unknown keys) still throw.
        const auto cfg = sq::io::parse_config_string(ss.str());
        for (const auto& d : sq::io::validate_config(cfg)) {
            report += d.severity == sq::io::Diagnostic::Severity::error ? "error "
                                                                        : "warning ";
            report += d.field_path + ": " + d.message + "\n";
            failed |= d.severity == sq::io::Diagnostic::Severity::error;
        }
    });
    if (st != SQ_OK) {
        if (diagnostics_out)
            *diagnostics_out = dup_string(std::string("error ") + sq_last_error() + "\n");
        return st;
    }
    if (diagnostics_out && !report.empty()) *diagnostics_out = dup_string(report);
    if (failed) {
        set_error("configuration is invalid");
        return SQ_ERR_CONFIG;
    }
    return SQ_OK;
}

sq_status sq_run(const sq_config* cfg, const sq_run_options* opts,
                 char** manifest_json_out) {
    if (!cfg) return invalid("null config");
    if (manifest_json_out) *manifest_json_out = nullptr;
    return guarded([&] {
        sq::experiments::RunOptions ro;
        if (opts) {
            if (opts->out_dir) ro.out_dir = opts->out_dir;
            ro.has_seed = opts->has_seed != 0;
            ro.seed = opts->seed;
            if (opts->trajectories > 0)
                ro.trajectories = static_cast<std::size_t>(opts->trajectories);
            ro.threads = opts->threads;
        }
        const auto manifest = sq::experiments::run(cfg->cfg, ro);
        if (manifest_json_out) *manifest_json_out = dup_string(manifest.to_json());
    });
}

sq_status sq_emit_plotdata(const char* csv_path, const char* out_dir) {
    if (!csv_path || !out_dir) return invalid("null argument");
    return guarded([&] { sq::io::emit_plotdata(csv_path, out_dir); });
}

sq_status sq_spin_beta_from_polarization(double p, double* out) {
    if (!out) return invalid("null output");
    return guarded([&] { *out = sq::spin::beta_from_polarization(p); });
}

sq_status sq_spin_partition_function(double nuclear_spin, double beta, double* out) {
    if (!out) return invalid("null output");
    return guarded([&] {
        *out = sq::spin::partition_function({nuclear_spin}, beta);
    });
}

sq_status sq_spin_variance_per_atom(double nuclear_spin, double p, double* out) {
    if (!out) return invalid("null output");
    return guarded([&] { *out = sq::spin::variance_per_atom({nuclear_spin}, p); });
}

sq_status sq_spin_noise_ratio(double nuclear_spin, double p, double* out) {
    if (!out) return invalid("null output");
    return guarded([&] { *out = sq::spin::noise_ratio({nuclear_spin}, p); });
}

sq_status sq_protocol_sql_variance(const sq_protocol_params* params, double* out) {
    if (!params || !out) return invalid("null argument");
    return guarded([&] {
        *out = sq::qnd::sql_variance(to_protocol_params(*params), params->total_time);
    });
}

sq_status sq_protocol_optimize(const sq_protocol_params* params, sq_scheme scheme,
                               sq_protocol_result* out) {
    if (!params || !out) return invalid("null argument");
    return guarded([&] {
        const auto res = sq::qnd::optimize_protocol(
            to_protocol_params(*params), params->total_time,
            scheme == SQ_SCHEME_ONE_PULSE ? sq::qnd::Scheme::one_pulse
                                          : sq::qnd::Scheme::two_pulse);
        out->eps1 = res.plan.eps1;
        out->eps2 = res.plan.eps2;
        out->t_m = res.plan.t_m;
        out->var_rel_sql = res.field_variance_rel_sql;
    });
}

} // extern "C"
