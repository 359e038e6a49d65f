#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spinqnd/config.hpp"
#include "spinqnd/polarimeter.hpp"

namespace sq::experiments {

struct RunOptions {
    std::string out_dir;          // empty: take the config's output_dir
    bool has_seed = false;
    std::uint64_t seed = 0;
    std::size_t trajectories = 0; // 0: take the config's count
    int threads = 0;              // 0: hardware concurrency
};

struct OutputFile {
    std::string name; // relative to the output directory
    std::string sha256;
    std::uint64_t bytes = 0;
};

struct Manifest {
    std::string tool_version;
    std::string experiment;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::size_t trajectories = 0;
    double wall_clock_s = 0.0;
    std::vector<OutputFile> outputs;

    std::string to_json() const;
};

/// Executes the experiment selected by the config, writes its CSV outputs and
/// run_manifest.json into the output directory, and returns the manifest.
/// Output bytes depend only on (config, seed, trajectories), never on the
/// thread count.
Manifest run(const io::RunConfig& cfg, const RunOptions& opts);

/// Noise-area measurement of one simulated operating point (used by the
/// sweep drivers and exposed for tests).
struct AreaMeasurement {
    double area = 0.0;      // atomic variance above the PSN floor, rad^2
    double raw_area = 0.0;  // before clamping
    double area_se = 0.0;   // standard error over records
    double floor = 0.0;     // rad^2/Hz
    std::pair<double, double> band{0.0, 0.0};
    pol::PSDEstimate psd;   // record-averaged
};

AreaMeasurement measure_noise_area(const io::RunConfig& cfg, double p0,
                                   const dyn::StrobeWaveform& strobe,
                                   std::size_t n_traj, int threads,
                                   std::uint64_t seed, std::uint64_t point_index);

/// Analysis band actually used for a config (explicit or derived from f_L).
std::pair<double, double> analysis_band(const io::RunConfig& cfg);

} // namespace sq::experiments
