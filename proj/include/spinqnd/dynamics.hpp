#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "spinqnd/rng.hpp"
#include "spinqnd/spin_model.hpp"

namespace sq::dyn {

struct EnsembleParams {
    spin::AtomSpec atom;
    double n_atoms = 1e6;
    double p0 = 0.0;     // initial longitudinal polarization, [0, 1)
    double gamma = 4.39822971502571e10; // rad s^-1 T^-1
    double r_sd = 10.0;  // spin-destruction rate, s^-1
    double r_se = 1.5e4; // spin-exchange rate, s^-1
    double od = 1e4;
};

struct StrobeWaveform {
    double f_s = 3.0e5;   // Hz
    double duty = 0.1;    // (0, 1]; duty = 1 is a continuous probe
    double phi0 = 0.0;    // rad
    double avg_flux = 1.0; // detected photon rate averaged over a period, s^-1
};

struct DynamicsConfig {
    double f_l = 1.5e5;       // Larmor frequency, Hz
    double dt = 0.0;          // integrator step, s (0 = derive from rates)
    double duration = 3.6e-3; // record length, s
    double tau_d = 0.0;       // diffusion correlation time, s (<= 0 disables)
    double ls_strength = 0.0; // light-shift noise coupling, s^-1/2 at unit flux
    std::uint64_t seed = 1;
    bool pump_hold = false;   // clamp F_z at its initial value (pump left on)
    std::size_t sample_stride = 1; // F_x sampled every `stride` steps
    bool capture_full_state = false; // also record F_y and F_z samples
};

struct TrajectoryState {
    double f_x = 0.0;
    double f_y = 0.0;
    double f_z = 0.0;
    double t = 0.0;
};

/// R(P_z) = R_sd + (1 - P_z) R_se. Spin exchange stops contributing in the
/// fully polarized limit.
double relaxation_rate(double p_z, const EnsembleParams& params);

struct GateSample {
    int on = 0;
    double instantaneous_flux = 0.0;
};

/// gate = 1 iff frac(f_s t + phi0/2pi) < duty; on-window flux is
/// avg_flux/duty so the period-averaged flux is duty-independent.
GateSample strobe_gate(double t, const StrobeWaveform& strobe);

/// One integration step of the collective-spin Langevin model:
///
///   dF_x = +w_L F_y dt - R_tot F_x dt + sqrt(2 R_tot s_eq^2) dW_x
///   dF_y = -w_L F_x dt - R_tot F_y dt + sqrt(2 R_tot s_eq^2) dW_y
///          + ls(t) F_z dW_ls                    (only while the gate is on)
///   dF_z = -R_sd (F_z - F_z,pump) dt
///
/// with R_tot = R(2F_z/N_A) + 1/tau_D and s_eq^2 = N_A * variance_per_atom
/// at the instantaneous polarization, so the stationary transverse variance
/// is pinned to the spin-temperature value (fluctuation-dissipation). The
/// deterministic rotation and decay are applied through their exact
/// exponential propagator; only the light-shift kick is an Euler-Maruyama
/// increment. ls(t) scales as sqrt(instantaneous_flux/avg_flux).
TrajectoryState step(const TrajectoryState& state, double dt,
                     const DynamicsConfig& cfg, const EnsembleParams& params,
                     const StrobeWaveform& strobe, RandomStream& rng);

/// Sampled F_x record of one trajectory plus the matching strobe gate.
/// f_y/f_z are filled only when capture_full_state is set.
struct Record {
    std::vector<double> t;
    std::vector<double> f_x;
    std::vector<double> f_y;
    std::vector<double> f_z;
    std::vector<std::uint8_t> gate;
    double sample_rate = 0.0;
};

/// Integrator step actually used for a config (cfg.dt, or an automatic one
/// that resolves both the Larmor/strobe oscillation and the on-windows).
double effective_dt(const DynamicsConfig& cfg, const StrobeWaveform& strobe);

/// Throws ConfigError when dt violates dt <= 1/(40 max(f_L, f_s)).
void check_step_size(double dt, const DynamicsConfig& cfg,
                     const StrobeWaveform& strobe);

/// Runs `n_traj` independent trajectories and hands each sampled record to
/// `consume(traj_index, record)`. Trajectory i is generated from the
/// counter-based stream (seed, point_index, i) and is bit-identical for any
/// thread count; `consume` may run concurrently for distinct indices.
///
/// When the diffusion time is finite, the measured transverse spin is a
/// mixture of exchange modes (weights fixed, slowest rate 1/tau_D), which
/// reproduces the non-Lorentzian line shape of diffusion through the probe
/// beam while leaving the total variance at the spin-temperature value.
void for_each_trajectory(const DynamicsConfig& cfg, const EnsembleParams& params,
                         const StrobeWaveform& strobe, std::size_t n_traj,
                         int threads, std::uint64_t point_index,
                         const std::function<void(std::size_t, const Record&)>& consume);

/// Materialized variant of for_each_trajectory (trajectory-index order).
std::vector<Record> simulate_record(const DynamicsConfig& cfg,
                                    const EnsembleParams& params,
                                    const StrobeWaveform& strobe,
                                    std::size_t n_traj, int threads = 1);

} // namespace sq::dyn
