#include "spinqnd/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "spinqnd/csv.hpp"
#include "spinqnd/dynamics.hpp"
#include "spinqnd/errors.hpp"
#include "spinqnd/parallel.hpp"
#include "spinqnd/qnd_protocol.hpp"
#include "spinqnd/sha256.hpp"
#include "spinqnd/version.hpp"

namespace sq::experiments {

namespace fs = std::filesystem;
using nlohmann::json;

std::string Manifest::to_json() const {
    json j;
    j["tool_version"] = tool_version;
    j["experiment"] = experiment;
    j["config_hash_sha256"] = config_hash;
    j["seed"] = seed;
    j["trajectories"] = trajectories;
    j["wall_clock_s"] = wall_clock_s;
    j["outputs"] = json::array();
    for (const auto& o : outputs)
        j["outputs"].push_back({{"name", o.name}, {"sha256", o.sha256}, {"bytes", o.bytes}});
    return j.dump(2) + "\n";
}

std::pair<double, double> analysis_band(const io::RunConfig& cfg) {
    if (cfg.analysis.band_hi_hz > 0.0)
        return {cfg.analysis.band_lo_hz, cfg.analysis.band_hi_hz};
    // Wide enough to hold the carrier peak at f_L plus the first strobe
    // sidebands at |f_s - f_L| for detunings up to ~25% around 2 f_L.
    return {0.25 * cfg.dynamics.f_l, 1.75 * cfg.dynamics.f_l};
}

AreaMeasurement measure_noise_area(const io::RunConfig& cfg, double p0,
                                   const dyn::StrobeWaveform& strobe,
                                   std::size_t n_traj, int threads,
                                   std::uint64_t seed, std::uint64_t point_index) {
    dyn::EnsembleParams ens = cfg.ensemble;
    ens.p0 = p0;
    dyn::DynamicsConfig dcfg = cfg.dynamics;
    dcfg.seed = seed;

    pol::PolarimeterConfig pcfg = cfg.polarimeter;
    const double dt = dyn::effective_dt(dcfg, strobe);
    if (pcfg.sample_rate <= 0.0)
        pcfg.sample_rate = 1.0 / (dt * static_cast<double>(std::max<std::size_t>(
                                           1, dcfg.sample_stride)));

    const auto band = analysis_band(cfg);

    struct PerRecord {
        std::vector<double> power;
        std::size_t n_avg = 0;
        double raw_band = 0.0;
    };
    std::vector<PerRecord> slots(n_traj);
    std::vector<double> freqs;
    double resolution = 0.0;

    dyn::for_each_trajectory(
        dcfg, ens, strobe, n_traj, threads, point_index,
        [&](std::size_t i, const dyn::Record& rec) {
            RandomStream psn = make_stream(seed, StreamPurpose::photon_shot_noise,
                                           point_index, i);
            const std::vector<double> phi =
                pol::synthesize_signal(rec.f_x, rec.gate, strobe.duty, pcfg, psn);
            const std::size_t seg =
                std::min<std::size_t>(cfg.analysis.segment_len, phi.size());
            pol::PSDEstimate psd =
                pol::welch_psd(phi, seg, pol::Window::hann, rec.sample_rate);
            double raw = 0.0;
            for (std::size_t k = 0; k + 1 < psd.freqs.size(); ++k) {
                if (psd.freqs[k] < band.first || psd.freqs[k + 1] > band.second)
                    continue;
                raw += 0.5 * (psd.power[k] + psd.power[k + 1]) *
                       (psd.freqs[k + 1] - psd.freqs[k]);
            }
            slots[i] = {std::move(psd.power), psd.n_avg, raw};
            if (i == 0) {
                freqs = std::move(psd.freqs);
                resolution = psd.resolution;
            }
        });

    // Ordered reduction keeps the averaged PSD independent of scheduling.
    pol::PSDEstimate avg;
    avg.freqs = freqs;
    avg.resolution = resolution;
    avg.power.assign(freqs.size(), 0.0);
    std::size_t total_avg = 0;
    for (const auto& s : slots) {
        for (std::size_t k = 0; k < avg.power.size(); ++k)
            avg.power[k] += s.power[k] * static_cast<double>(s.n_avg);
        total_avg += s.n_avg;
    }
    for (auto& p : avg.power) p /= static_cast<double>(total_avg);
    avg.n_avg = total_avg;

    AreaMeasurement out;
    out.band = band;
    out.floor = pol::estimate_psn_floor(avg, band);
    const pol::NoiseArea area = pol::atomic_noise_area(avg, out.floor, band);
    out.area = area.atomic_variance;
    out.raw_area = area.raw_variance;

    double mean = 0.0;
    for (const auto& s : slots) mean += s.raw_band;
    mean /= static_cast<double>(n_traj);
    double var = 0.0;
    for (const auto& s : slots) var += (s.raw_band - mean) * (s.raw_band - mean);
    if (n_traj > 1) var /= static_cast<double>(n_traj - 1);
    out.area_se = std::sqrt(var / static_cast<double>(n_traj));
    out.psd = std::move(avg);
    return out;
}

namespace {

struct Runtime {
    fs::path out_dir;
    std::uint64_t seed = 0;
    std::size_t n_traj = 0;
    int threads = 1;
};

Runtime resolve(const io::RunConfig& cfg, const RunOptions& opts) {
    Runtime rt;
    rt.out_dir = opts.out_dir.empty() ? fs::path(cfg.output_dir) : fs::path(opts.out_dir);
    rt.seed = opts.has_seed ? opts.seed : cfg.seed;
    rt.n_traj = opts.trajectories ? opts.trajectories : cfg.trajectories;
    rt.threads = resolve_thread_count(opts.threads);
    return rt;
}

void emit(Manifest& man, const Runtime& rt, const std::string& name,
          const io::Table& table) {
    const fs::path path = rt.out_dir / name;
    io::write_csv(path, table);
    OutputFile f;
    f.name = name;
    f.sha256 = io::sha256_file(path);
    f.bytes = fs::file_size(path);
    man.outputs.push_back(std::move(f));
}

// The per-point RNG key space: each sweep point uses a distinct point index
// for the polarized and unpolarized branches.
constexpr std::uint64_t kPolarizedBranch = 0;
constexpr std::uint64_t kUnpolarizedBranch = 1;

std::uint64_t point_key(std::size_t sweep_index, std::uint64_t branch) {
    return static_cast<std::uint64_t>(sweep_index) * 2 + branch;
}

void run_psd(const io::RunConfig& cfg, const Runtime& rt, Manifest& man) {
    const auto m = measure_noise_area(cfg, cfg.ensemble.p0, cfg.strobe, rt.n_traj,
                                      rt.threads, rt.seed, 0);

    io::Table psd;
    psd.header = {"freq_hz", "psd_rad2_per_hz"};
    for (std::size_t k = 0; k < m.psd.freqs.size(); ++k)
        psd.rows.push_back({m.psd.freqs[k], m.psd.power[k]});
    emit(man, rt, "psd.csv", psd);

    io::Table area;
    area.header = {"band_lo_hz",  "band_hi_hz",       "psn_level_rad2_per_hz",
                   "atomic_variance_rad2", "raw_variance_rad2", "area_se_rad2",
                   "n_records"};
    area.rows.push_back({m.band.first, m.band.second, m.floor, m.area, m.raw_area,
                         m.area_se, static_cast<double>(rt.n_traj)});
    emit(man, rt, "noise_area.csv", area);

    if (cfg.analysis.emit_trajectory) {
        dyn::DynamicsConfig dcfg = cfg.dynamics;
        dcfg.seed = rt.seed;
        dcfg.capture_full_state = true;
        const auto recs = dyn::simulate_record(dcfg, cfg.ensemble, cfg.strobe, 1, 1);
        const auto& r = recs.front();

        io::Table traj;
        traj.header = {"t_s", "F_x", "F_y", "F_z"};
        for (std::size_t k = 0; k < r.t.size(); ++k)
            traj.rows.push_back({r.t[k], r.f_x[k], r.f_y[k], r.f_z[k]});
        emit(man, rt, "trajectory.csv", traj);

        pol::PolarimeterConfig pcfg = cfg.polarimeter;
        if (pcfg.sample_rate <= 0.0) pcfg.sample_rate = r.sample_rate;
        RandomStream psn = make_stream(rt.seed, StreamPurpose::photon_shot_noise, 0, 0);
        const auto phi =
            pol::synthesize_signal(r.f_x, r.gate, cfg.strobe.duty, pcfg, psn);
        io::Table ts;
        ts.header = {"t_s", "phi_rad"};
        for (std::size_t k = 0; k < r.t.size(); ++k)
            ts.rows.push_back({r.t[k], phi[k]});
        emit(man, rt, "timeseries.csv", ts);
    }
}

void run_sweep_strobe(const io::RunConfig& cfg, const Runtime& rt, Manifest& man) {
    io::Table table;
    table.header = {"f_s_hz", "area_pol_rad2", "area_unpol_rad2", "ratio"};
    for (std::size_t i = 0; i < cfg.sweep.f_s_grid_hz.size(); ++i) {
        dyn::StrobeWaveform strobe = cfg.strobe;
        strobe.f_s = cfg.sweep.f_s_grid_hz[i];
        const auto pol = measure_noise_area(cfg, cfg.ensemble.p0, strobe, rt.n_traj,
                                            rt.threads, rt.seed,
                                            point_key(i, kPolarizedBranch));
        const auto unp = measure_noise_area(cfg, 0.0, strobe, rt.n_traj, rt.threads,
                                            rt.seed, point_key(i, kUnpolarizedBranch));
        table.rows.push_back(
            {strobe.f_s, pol.area, unp.area, pol.area / unp.area});
    }
    emit(man, rt, "sweep_strobe.csv", table);
}

void run_sweep_duty(const io::RunConfig& cfg, const Runtime& rt, Manifest& man) {
    io::Table table;
    table.header = {"duty", "area_pol_rad2", "area_unpol_rad2", "ratio"};
    for (std::size_t i = 0; i < cfg.sweep.duty_grid.size(); ++i) {
        dyn::StrobeWaveform strobe = cfg.strobe;
        strobe.duty = cfg.sweep.duty_grid[i];
        const auto pol = measure_noise_area(cfg, cfg.ensemble.p0, strobe, rt.n_traj,
                                            rt.threads, rt.seed,
                                            point_key(i, kPolarizedBranch));
        const auto unp = measure_noise_area(cfg, 0.0, strobe, rt.n_traj, rt.threads,
                                            rt.seed, point_key(i, kUnpolarizedBranch));
        table.rows.push_back(
            {strobe.duty, pol.area, unp.area, pol.area / unp.area});
    }
    emit(man, rt, "sweep_duty.csv", table);
}

void run_sweep_polarization(const io::RunConfig& cfg, const Runtime& rt, Manifest& man) {
    // The unpolarized baseline is measured once and shared by every ratio.
    const auto baseline = measure_noise_area(cfg, 0.0, cfg.strobe, rt.n_traj,
                                             rt.threads, rt.seed,
                                             point_key(0, kUnpolarizedBranch));
    io::Table table;
    table.header = {"p", "area_rad2", "ratio_sim", "ratio_model"};
    for (std::size_t i = 0; i < cfg.sweep.p_grid.size(); ++i) {
        const double p = cfg.sweep.p_grid[i];
        AreaMeasurement m;
        if (p == 0.0) {
            m = baseline;
        } else {
            m = measure_noise_area(cfg, p, cfg.strobe, rt.n_traj, rt.threads, rt.seed,
                                   point_key(i + 1, kPolarizedBranch));
        }
        table.rows.push_back({p, m.area, m.area / baseline.area,
                              spin::noise_ratio(cfg.ensemble.atom, p)});
    }
    emit(man, rt, "sweep_polarization.csv", table);
}

void run_optimize_protocol(const io::RunConfig& cfg, const Runtime& rt, Manifest& man) {
    qnd::ProtocolParams params;
    params.n_atoms = cfg.ensemble.n_atoms;
    params.gamma = cfg.ensemble.gamma;
    params.r_sd = cfg.ensemble.r_sd;
    params.p_init = cfg.protocol.p_init;
    params.pulse_decoherence = cfg.protocol.pulse_decoherence;

    const auto rows =
        qnd::sweep_od(params, cfg.protocol.od_grid, cfg.protocol.r_se_over_r_sd_grid,
                      cfg.protocol.total_time_s, rt.threads);

    io::Table table;
    table.header = {"od", "r_se_over_r_sd", "scheme", "eps1", "eps2", "t_m_s",
                    "var_rel_sql"};
    for (const auto& r : rows)
        table.rows.push_back({r.od, r.r_se_over_r_sd, qnd::scheme_name(r.scheme),
                              r.plan.eps1, r.plan.eps2, r.plan.t_m, r.var_rel_sql});
    emit(man, rt, "protocol_sweep.csv", table);
}

} // namespace

Manifest run(const io::RunConfig& cfg, const RunOptions& opts) {
    for (const auto& d : io::validate_config(cfg))
        if (d.severity == io::Diagnostic::Severity::error)
            throw ConfigError(d.field_path, d.message);

    const Runtime rt = resolve(cfg, opts);
    fs::create_directories(rt.out_dir);

    Manifest man;
    man.tool_version = kVersion;
    man.experiment = io::experiment_name(cfg.experiment);
    man.config_hash = io::config_hash(cfg);
    man.seed = rt.seed;
    man.trajectories = rt.n_traj;

    const auto t0 = std::chrono::steady_clock::now();
    switch (cfg.experiment) {
        case io::Experiment::psd: run_psd(cfg, rt, man); break;
        case io::Experiment::sweep_strobe: run_sweep_strobe(cfg, rt, man); break;
        case io::Experiment::sweep_duty: run_sweep_duty(cfg, rt, man); break;
        case io::Experiment::sweep_polarization:
            run_sweep_polarization(cfg, rt, man);
            break;
        case io::Experiment::optimize_protocol:
            run_optimize_protocol(cfg, rt, man);
            break;
    }
    man.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::ofstream mf(rt.out_dir / "run_manifest.json", std::ios::binary);
    if (!mf) throw ConfigError("", "cannot write run_manifest.json");
    mf << man.to_json();
    return man;
}

} // namespace sq::experiments
