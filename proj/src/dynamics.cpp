#include "spinqnd/dynamics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "spinqnd/errors.hpp"
#include "spinqnd/parallel.hpp"

namespace sq::dyn {

namespace {

// Exchange-mode expansion of the beam-overlap correlation. Atoms diffusing
// through the probe beam decorrelate the measured sub-ensemble on several
// timescales at once; three exponentials with these weights give the
// characteristic non-Lorentzian pedestal. The slowest rate is 1/tau_D.
constexpr std::array<double, 3> kModeWeights{0.55, 0.30, 0.15};
constexpr std::array<double, 3> kModeRates{1.0, 5.0, 25.0};

bool diffusion_enabled(const DynamicsConfig& cfg) { return cfg.tau_d > 0.0; }

double diffusion_rate(const DynamicsConfig& cfg) {
    return diffusion_enabled(cfg) ? 1.0 / cfg.tau_d : 0.0;
}

} // namespace

double relaxation_rate(double p_z, const EnsembleParams& params) {
    if (!(p_z >= -1.0 && p_z <= 1.0))
        throw std::domain_error("relaxation_rate: P_z must lie in [-1, 1]");
    return params.r_sd + (1.0 - p_z) * params.r_se;
}

GateSample strobe_gate(double t, const StrobeWaveform& strobe) {
    const double phase = strobe.f_s * t + strobe.phi0 / (2.0 * M_PI);
    const double frac = phase - std::floor(phase);
    GateSample g;
    g.on = frac < strobe.duty ? 1 : 0;
    g.instantaneous_flux = g.on ? strobe.avg_flux / strobe.duty : 0.0;
    return g;
}

void check_step_size(double dt, const DynamicsConfig& cfg,
                     const StrobeWaveform& strobe) {
    const double f_max = std::max(cfg.f_l, strobe.f_s);
    const double limit = 1.0 / (40.0 * f_max);
    if (!(dt > 0.0) || dt > limit * (1.0 + 1e-12))
        throw ConfigError("dynamics.dt",
                          "integrator step must satisfy dt <= 1/(40 max(f_L, f_s)) = " +
                              std::to_string(limit) + " s");
}

double effective_dt(const DynamicsConfig& cfg, const StrobeWaveform& strobe) {
    if (cfg.dt > 0.0) return cfg.dt;
    // Resolve the fastest oscillation with >= 40 steps per period and every
    // on-window with >= 5 samples; keeping the rate an integer multiple of
    // f_s places window edges identically in every strobe period.
    const double f_max = std::max(cfg.f_l, strobe.f_s);
    const double per_period = std::ceil(40.0 * f_max / strobe.f_s);
    const double per_window = std::ceil(5.0 / strobe.duty);
    const double q = std::max(per_period, per_window);
    return 1.0 / (q * strobe.f_s);
}

TrajectoryState step(const TrajectoryState& state, double dt,
                     const DynamicsConfig& cfg, const EnsembleParams& params,
                     const StrobeWaveform& strobe, RandomStream& rng) {
    const double p_z = std::clamp(2.0 * state.f_z / params.n_atoms, -1.0, 1.0);
    const double r_tot = relaxation_rate(p_z, params) + diffusion_rate(cfg);
    const double sigma2_eq =
        params.n_atoms * spin::variance_per_atom(params.atom, p_z);

    const double phi = 2.0 * M_PI * cfg.f_l * dt;
    const double c = std::cos(phi), s = std::sin(phi);
    const double decay = std::exp(-r_tot * dt);
    const double noise = std::sqrt(sigma2_eq * -std::expm1(-2.0 * r_tot * dt));

    TrajectoryState next;
    next.f_x = (state.f_x * c + state.f_y * s) * decay + noise * rng.next_gaussian();
    next.f_y = (-state.f_x * s + state.f_y * c) * decay + noise * rng.next_gaussian();

    if (cfg.ls_strength > 0.0) {
        // Midpoint evaluation keeps window-edge samples away from the exact
        // gate threshold, where rounding of f_s*t would decide inclusion.
        const GateSample g = strobe_gate(state.t + 0.5 * dt, strobe);
        if (g.on) {
            const double amp = cfg.ls_strength *
                               std::sqrt(g.instantaneous_flux / strobe.avg_flux * dt);
            next.f_y += amp * state.f_z * rng.next_gaussian();
        }
    }

    next.f_z = cfg.pump_hold ? state.f_z : state.f_z * std::exp(-params.r_sd * dt);
    next.t = state.t + dt;
    return next;
}

namespace {

// Per-step coefficient tables. F_z(t) is deterministic, so relaxation rates,
// equilibrium variances and light-shift amplitudes are shared by every
// trajectory of a run.
struct SimulationPlan {
    std::size_t n_steps = 0;
    std::size_t n_modes = 1;
    std::size_t stride = 1;
    double dt = 0.0;
    double rot_c = 1.0, rot_s = 0.0;
    std::vector<double> f_z;       // per step
    std::vector<double> ls_amp;    // per step, 0 when the gate is off
    std::vector<std::uint8_t> gate; // per sample
    std::vector<double> decay;     // n_modes per step
    std::vector<double> noise;     // n_modes per step
    std::array<double, 3> weights{1.0, 0.0, 0.0};
};

SimulationPlan build_plan(const DynamicsConfig& cfg, const EnsembleParams& params,
                          const StrobeWaveform& strobe) {
    SimulationPlan plan;
    plan.dt = effective_dt(cfg, strobe);
    check_step_size(plan.dt, cfg, strobe);
    plan.stride = std::max<std::size_t>(1, cfg.sample_stride);
    plan.n_steps = static_cast<std::size_t>(std::ceil(cfg.duration / plan.dt));
    if (plan.n_steps < 2)
        throw ConfigError("dynamics.duration", "record shorter than two steps");

    plan.n_modes = diffusion_enabled(cfg) ? kModeWeights.size() : 1;
    if (plan.n_modes == 1)
        plan.weights = {1.0, 0.0, 0.0};
    else
        plan.weights = kModeWeights;

    const double phi = 2.0 * M_PI * cfg.f_l * plan.dt;
    plan.rot_c = std::cos(phi);
    plan.rot_s = std::sin(phi);

    const double fz0 = params.p0 * params.n_atoms / 2.0;
    const double fz_step = cfg.pump_hold ? 1.0 : std::exp(-params.r_sd * plan.dt);

    plan.f_z.resize(plan.n_steps);
    plan.ls_amp.resize(plan.n_steps);
    plan.decay.resize(plan.n_steps * plan.n_modes);
    plan.noise.resize(plan.n_steps * plan.n_modes);

    const std::size_t n_samples = (plan.n_steps + plan.stride - 1) / plan.stride;
    plan.gate.resize(n_samples);

    double fz = fz0;
    for (std::size_t i = 0; i < plan.n_steps; ++i) {
        const double t = static_cast<double>(i) * plan.dt;
        plan.f_z[i] = fz;
        const double p_z = std::clamp(2.0 * fz / params.n_atoms, -1.0, 1.0);
        const double r_at = relaxation_rate(p_z, params);
        const double sigma2 =
            params.n_atoms * spin::variance_per_atom(params.atom, p_z);

        for (std::size_t k = 0; k < plan.n_modes; ++k) {
            const double r_k =
                r_at + (plan.n_modes == 1 ? diffusion_rate(cfg)
                                          : kModeRates[k] / cfg.tau_d);
            const double d = std::exp(-r_k * plan.dt);
            plan.decay[i * plan.n_modes + k] = d;
            plan.noise[i * plan.n_modes + k] =
                std::sqrt(plan.weights[k] * sigma2 * -std::expm1(-2.0 * r_k * plan.dt));
        }

        // Midpoint of the step: window edges then sit half a sample away from
        // the exact gate threshold, so the on-fraction is duty-exact instead
        // of drifting with floating-point rounding of f_s*t.
        const GateSample g = strobe_gate(t + 0.5 * plan.dt, strobe);
        if (i % plan.stride == 0) plan.gate[i / plan.stride] = static_cast<std::uint8_t>(g.on);
        plan.ls_amp[i] =
            (cfg.ls_strength > 0.0 && g.on)
                ? cfg.ls_strength *
                      std::sqrt(g.instantaneous_flux / strobe.avg_flux * plan.dt)
                : 0.0;

        fz *= fz_step;
    }
    return plan;
}

Record run_trajectory(const SimulationPlan& plan, const DynamicsConfig& cfg,
                      const EnsembleParams& params, std::uint64_t point_index,
                      std::size_t traj_index) {
    RandomStream rng =
        make_stream(cfg.seed, StreamPurpose::dynamics, point_index, traj_index);

    // Stationary start: each mode carries its weight of the equilibrium
    // transverse variance at the initial polarization.
    const double p_z0 = std::clamp(params.p0, -1.0, 1.0);
    const double sigma2_0 =
        params.n_atoms * spin::variance_per_atom(params.atom, p_z0);
    std::array<double, 3> x{}, y{};
    for (std::size_t k = 0; k < plan.n_modes; ++k) {
        const double s0 = std::sqrt(plan.weights[k] * sigma2_0);
        x[k] = s0 * rng.next_gaussian();
        y[k] = s0 * rng.next_gaussian();
    }

    Record rec;
    const std::size_t n_samples = plan.gate.size();
    rec.t.resize(n_samples);
    rec.f_x.resize(n_samples);
    rec.gate = plan.gate;
    rec.sample_rate = 1.0 / (plan.dt * static_cast<double>(plan.stride));
    if (cfg.capture_full_state) {
        rec.f_y.resize(n_samples);
        rec.f_z.resize(n_samples);
    }

    std::size_t sample = 0;
    for (std::size_t i = 0; i < plan.n_steps; ++i) {
        if (i % plan.stride == 0) {
            double fx = 0.0;
            for (std::size_t k = 0; k < plan.n_modes; ++k) fx += x[k];
            rec.t[sample] = static_cast<double>(i) * plan.dt;
            rec.f_x[sample] = fx;
            if (cfg.capture_full_state) {
                double fy = 0.0;
                for (std::size_t k = 0; k < plan.n_modes; ++k) fy += y[k];
                rec.f_y[sample] = fy;
                rec.f_z[sample] = plan.f_z[i];
            }
            ++sample;
        }

        const double ls = plan.ls_amp[i];
        const double kick = ls > 0.0 ? ls * plan.f_z[i] * rng.next_gaussian() : 0.0;

        for (std::size_t k = 0; k < plan.n_modes; ++k) {
            const double d = plan.decay[i * plan.n_modes + k];
            const double s = plan.noise[i * plan.n_modes + k];
            const double nx = (x[k] * plan.rot_c + y[k] * plan.rot_s) * d +
                              s * rng.next_gaussian();
            const double ny = (-x[k] * plan.rot_s + y[k] * plan.rot_c) * d +
                              s * rng.next_gaussian() + plan.weights[k] * kick;
            x[k] = nx;
            y[k] = ny;
        }
    }

    if (!std::isfinite(rec.f_x.back()))
        throw NumericError("dynamics", "non-finite spin state in trajectory " +
                                           std::to_string(traj_index));
    return rec;
}

} // namespace

void for_each_trajectory(const DynamicsConfig& cfg, const EnsembleParams& params,
                         const StrobeWaveform& strobe, std::size_t n_traj,
                         int threads, std::uint64_t point_index,
                         const std::function<void(std::size_t, const Record&)>& consume) {
    if (n_traj == 0) throw std::invalid_argument("dynamics: n_traj must be >= 1");
    const SimulationPlan plan = build_plan(cfg, params, strobe);
    parallel_for(n_traj, threads, [&](std::size_t i) {
        consume(i, run_trajectory(plan, cfg, params, point_index, i));
    });
}

std::vector<Record> simulate_record(const DynamicsConfig& cfg,
                                    const EnsembleParams& params,
                                    const StrobeWaveform& strobe,
                                    std::size_t n_traj, int threads) {
    std::vector<Record> records(n_traj);
    for_each_trajectory(cfg, params, strobe, n_traj, threads, 0,
                        [&](std::size_t i, const Record& r) { records[i] = r; });
    return records;
}

} // namespace sq::dyn
