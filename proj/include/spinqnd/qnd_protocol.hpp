#pragma once

#include <string>
#include <vector>

namespace sq::qnd {

// Two-pulse QND magnetometry model for a spin-1/2 ensemble. Pulse strength
// eps is the product of pulse duration and photon scattering rate; the
// measurement noise of a pulse is var[S_x] = (1 + 1/(eps*OD)) N_A/4 and the
// spin correlation between pulses decays as exp[-int_0^tm R(t) dt] with
// R(t) = R_sd + (1 - P_z(t)) R_se.

struct ProtocolParams {
    double n_atoms = 1e10;
    double gamma = 4.39822971502571e10; // rad s^-1 T^-1
    double r_sd = 1.0;                  // s^-1
    double r_se = 0.0;                  // s^-1
    double od = 1e4;
    double p_init = 1.0;
    /// Fraction of a pulse's scattering events that destroy measured spin
    /// coherence/polarization (survival factor exp(-chi*eps) per pulse).
    /// Zero leaves pulses with a pure readout-noise cost.
    double pulse_decoherence = 0.0;
};

struct PulsePlan {
    double eps1 = 1.0;
    double eps2 = 1.0;
    double t_m = 0.1; // s
};

enum class Scheme { one_pulse, two_pulse };

struct RelaxationModel {
    double r_sd = 1.0;
    double r_se = 0.0;
    double p_z0 = 1.0; // longitudinal polarization at t = 0
};

struct ProtocolResult {
    Scheme scheme = Scheme::two_pulse;
    PulsePlan plan;
    double field_variance_rel_sql = 0.0;
};

struct OptimizeOptions {
    int multistarts_per_axis = 2; // 2 -> 8 starts for the two-pulse scheme
    double eps_min = 1e-3;
    double eps_max = 10.0;
    double t_m_min_over_r_sd = 1e-4; // t_m lower bound in units of 1/R_sd
    double t_m_max_over_r_sd = 10.0;
};

/// Readout variance of one probe pulse: (1 + 1/(eps*OD)) * N_A/4.
/// Throws std::domain_error for nonpositive eps or OD.
double measurement_variance(double eps, double od, double n_atoms);

/// int_0^tm R(t) dt with P_z(t) = P_z0 exp(-R_sd t), in closed form:
/// R_sd*tm + R_se*[tm - P_z0 (1 - e^{-R_sd tm})/R_sd].
double integrated_rate(double t_m, const RelaxationModel& model);

/// cov[S_x(0), S_x(tm)] = (N_A/4) e^{-eps1} exp[-integrated_rate(tm)].
/// `model.p_z0` must already reflect the post-pulse polarization.
double covariance(double t_m, double n_atoms, const RelaxationModel& model,
                  double eps1);

/// SQL reference: 2 R_sd / (N_A * total_time * gamma^2).
double sql_variance(const ProtocolParams& params, double total_time);

/// Field variance of the conditional two-pulse estimate
/// S_x(tm) - S_x(0) cov/var, per total_time of repeated shots, relative to
/// the SQL. Degenerate plans return a large finite value.
double two_pulse_field_variance(const PulsePlan& plan, const ProtocolParams& params,
                                double total_time);

/// Same pipeline without conditioning (single pulse of strength eps2 after
/// free evolution for t_m).
double one_pulse_field_variance(double t_m, double eps2, const ProtocolParams& params,
                                double total_time);

/// Multi-start Nelder-Mead over log(eps1), log(eps2), log(t_m) (the one-pulse
/// scheme drops eps1). Fully deterministic; throws NumericError if every
/// start fails to produce a finite optimum.
ProtocolResult optimize_protocol(const ProtocolParams& params, double total_time,
                                 Scheme scheme, const OptimizeOptions& opts = {});

struct SweepRow {
    double od = 0.0;
    double r_se_over_r_sd = 0.0;
    Scheme scheme = Scheme::two_pulse;
    PulsePlan plan;
    double var_rel_sql = 0.0;
};

/// Optimizes both schemes on the (OD, R_se/R_sd) grid. Row order: ratio-major,
/// then OD ascending, one_pulse before two_pulse.
std::vector<SweepRow> sweep_od(const ProtocolParams& base,
                               const std::vector<double>& od_grid,
                               const std::vector<double>& r_se_over_r_sd_grid,
                               double total_time, int threads = 1,
                               const OptimizeOptions& opts = {});

std::string scheme_name(Scheme s);

} // namespace sq::qnd
