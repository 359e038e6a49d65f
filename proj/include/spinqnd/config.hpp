#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spinqnd/dynamics.hpp"
#include "spinqnd/polarimeter.hpp"

namespace sq::io {

enum class Experiment {
    psd,
    sweep_strobe,
    sweep_duty,
    sweep_polarization,
    optimize_protocol,
};

std::string experiment_name(Experiment e);

struct AnalysisConfig {
    double band_lo_hz = 0.0; // 0 = derive from f_L
    double band_hi_hz = 0.0;
    std::size_t segment_len = 8192;
    bool emit_trajectory = false;
};

struct SweepConfig {
    std::vector<double> f_s_grid_hz;
    std::vector<double> duty_grid;
    std::vector<double> p_grid;
};

struct ProtocolConfig {
    double total_time_s = 1.0;
    std::vector<double> od_grid;
    std::vector<double> r_se_over_r_sd_grid;
    double p_init = 1.0;
    double pulse_decoherence = 0.0;
};

struct RunConfig {
    std::uint64_t seed = 1;
    std::size_t trajectories = 200;
    Experiment experiment = Experiment::psd;
    dyn::EnsembleParams ensemble;
    dyn::DynamicsConfig dynamics;
    dyn::StrobeWaveform strobe;
    pol::PolarimeterConfig polarimeter;
    AnalysisConfig analysis;
    SweepConfig sweep;
    ProtocolConfig protocol;
    std::string output_dir = "out";
};

struct Diagnostic {
    enum class Severity { error, warning };
    Severity severity = Severity::error;
    std::string field_path;
    std::string message;
};

/// Parses a config document. Unknown keys anywhere are rejected with their
/// field path; hard invariant violations throw ConfigError.
RunConfig load_config_string(const std::string& json_text);
RunConfig load_config_file(const std::filesystem::path& path);

/// Parse + defaults only: structural problems (bad JSON, unknown keys, wrong
/// types) still throw, but invariant violations are left for
/// validate_config so callers can report all of them at once.
RunConfig parse_config_string(const std::string& json_text);

/// Full validation without execution: every violated invariant is reported
/// with its field path. Warnings (e.g. a record much shorter than the atomic
/// correlation time) do not fail validation.
std::vector<Diagnostic> validate_config(const RunConfig& cfg);

/// Effective config with every default resolved, as canonical JSON
/// (alphabetical keys, stable float formatting). parse(serialize(x)) == x.
std::string effective_config_json(const RunConfig& cfg);

/// SHA-256 (hex) of the canonical effective config.
std::string config_hash(const RunConfig& cfg);

} // namespace sq::io
