#include "spinqnd/qnd_protocol.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "spinqnd/errors.hpp"
#include "spinqnd/nelder_mead.hpp"
#include "spinqnd/parallel.hpp"

namespace sq::qnd {

namespace {

constexpr double kHugeVariance = 1e100;

bool finite(double x) { return std::isfinite(x); }

} // namespace

double measurement_variance(double eps, double od, double n_atoms) {
    if (!(eps > 0.0)) throw std::domain_error("pulse strength eps must be > 0");
    if (!(od > 0.0)) throw std::domain_error("optical density must be > 0");
    return (1.0 + 1.0 / (eps * od)) * n_atoms / 4.0;
}

double integrated_rate(double t_m, const RelaxationModel& model) {
    if (t_m < 0.0) throw std::domain_error("t_m must be >= 0");
    // (1 - e^{-R_sd t}) / R_sd via expm1 to stay accurate for R_sd*t << 1.
    const double ramp = -std::expm1(-model.r_sd * t_m) / model.r_sd;
    return model.r_sd * t_m + model.r_se * (t_m - model.p_z0 * ramp);
}

double covariance(double t_m, double n_atoms, const RelaxationModel& model,
                  double eps1) {
    return 0.25 * n_atoms * std::exp(-eps1) * std::exp(-integrated_rate(t_m, model));
}

double sql_variance(const ProtocolParams& params, double total_time) {
    if (!(total_time > 0.0)) throw std::domain_error("total_time must be > 0");
    return 2.0 * params.r_sd /
           (params.n_atoms * total_time * params.gamma * params.gamma);
}

namespace {

// Shared tail of both schemes: per-shot field variance from (var_c, slope),
// repetition averaging, and normalization by the SQL.
double relative_variance(double var_c, double slope, double t_m,
                         const ProtocolParams& params, double total_time) {
    const double slope_sq = std::max(slope * slope, 1e-300);
    const double shots = total_time / t_m;
    const double db2 = var_c / (slope_sq * shots);
    const double rel = db2 / sql_variance(params, total_time);
    if (!finite(rel)) return kHugeVariance;
    return std::min(rel, kHugeVariance);
}

} // namespace

double two_pulse_field_variance(const PulsePlan& plan, const ProtocolParams& params,
                                double total_time) {
    if (!(plan.eps1 > 0.0 && plan.eps2 > 0.0 && plan.t_m > 0.0))
        throw std::domain_error("pulse plan requires eps1, eps2, t_m > 0");
    if (!(total_time >= plan.t_m))
        throw std::domain_error("total_time must be >= t_m");

    const double eff = params.pulse_decoherence * plan.eps1;
    RelaxationModel model{params.r_sd, params.r_se, params.p_init * std::exp(-eff)};

    const double var1 = measurement_variance(plan.eps1, params.od, params.n_atoms);
    const double var2 = measurement_variance(plan.eps2, params.od, params.n_atoms);
    const double cov = covariance(plan.t_m, params.n_atoms, model, eff);
    const double var_c = var2 - cov * cov / var1;

    const double decay = std::exp(-eff) * std::exp(-integrated_rate(plan.t_m, model));
    const double slope = params.gamma * plan.t_m * (params.n_atoms / 2.0) * decay;
    return relative_variance(var_c, slope, plan.t_m, params, total_time);
}

double one_pulse_field_variance(double t_m, double eps2, const ProtocolParams& params,
                                double total_time) {
    if (!(t_m > 0.0)) throw std::domain_error("t_m must be > 0");
    if (!(total_time >= t_m)) throw std::domain_error("total_time must be >= t_m");

    RelaxationModel model{params.r_sd, params.r_se, params.p_init};
    const double var2 = measurement_variance(eps2, params.od, params.n_atoms);
    const double decay = std::exp(-integrated_rate(t_m, model));
    const double slope = params.gamma * t_m * (params.n_atoms / 2.0) * decay;
    return relative_variance(var2, slope, t_m, params, total_time);
}

ProtocolResult optimize_protocol(const ProtocolParams& params, double total_time,
                                 Scheme scheme, const OptimizeOptions& opts) {
    const bool two = scheme == Scheme::two_pulse;
    const double le_min = std::log(opts.eps_min);
    const double le_max = std::log(opts.eps_max);
    const double lt_min = std::log(opts.t_m_min_over_r_sd / params.r_sd);
    const double lt_max =
        std::log(std::min(opts.t_m_max_over_r_sd / params.r_sd, total_time));
    if (!(lt_min < lt_max))
        throw NumericError("qnd-protocol", "empty t_m search interval");

    // Coordinates are logs of (eps1, eps2, t_m); clamping to the box keeps the
    // objective defined everywhere the simplex wanders.
    auto objective = [&](const std::vector<double>& lx) {
        PulsePlan plan;
        std::size_t i = 0;
        if (two) plan.eps1 = std::exp(std::clamp(lx[i++], le_min, le_max));
        plan.eps2 = std::exp(std::clamp(lx[i++], le_min, le_max));
        plan.t_m = std::exp(std::clamp(lx[i], lt_min, lt_max));
        return two ? two_pulse_field_variance(plan, params, total_time)
                   : one_pulse_field_variance(plan.t_m, plan.eps2, params, total_time);
    };

    // Multi-start lattice on the log box.
    std::vector<double> eps_starts, t_starts;
    const int k = std::max(2, opts.multistarts_per_axis);
    for (int i = 0; i < k; ++i) {
        const double f = (i + 1.0) / (k + 1.0);
        eps_starts.push_back(le_min + f * (le_max - le_min));
        t_starts.push_back(lt_min + f * (lt_max - lt_min));
    }

    std::vector<std::vector<double>> starts;
    if (two) {
        for (double a : eps_starts)
            for (double b : eps_starts)
                for (double t : t_starts) starts.push_back({a, b, t});
    } else {
        for (double b : eps_starts)
            for (double t : t_starts) starts.push_back({b, t});
    }

    opt::SimplexOptions sopts;
    sopts.max_evaluations = 6000;
    sopts.initial_step = 0.5;

    bool found = false;
    opt::SimplexResult best;
    for (const auto& s : starts) {
        auto r = opt::nelder_mead(objective, s, sopts);
        // polish from the located minimum with a smaller simplex
        opt::SimplexOptions fine = sopts;
        fine.initial_step = 0.05;
        r = opt::nelder_mead(objective, r.x, fine);
        if (!finite(r.value) || r.value >= kHugeVariance) continue;
        if (!found || r.value < best.value) {
            best = r;
            found = true;
        }
    }
    if (!found)
        throw NumericError("qnd-protocol",
                           "all optimizer starts diverged (scheme " +
                               scheme_name(scheme) + ", OD " + std::to_string(params.od) + ")");

    ProtocolResult out;
    out.scheme = scheme;
    std::size_t i = 0;
    if (two) out.plan.eps1 = std::exp(std::clamp(best.x[i++], le_min, le_max));
    out.plan.eps2 = std::exp(std::clamp(best.x[i++], le_min, le_max));
    out.plan.t_m = std::exp(std::clamp(best.x[i], lt_min, lt_max));
    if (!two) out.plan.eps1 = 0.0;
    out.field_variance_rel_sql = best.value;
    return out;
}

std::vector<SweepRow> sweep_od(const ProtocolParams& base,
                               const std::vector<double>& od_grid,
                               const std::vector<double>& r_se_over_r_sd_grid,
                               double total_time, int threads,
                               const OptimizeOptions& opts) {
    if (od_grid.empty() || r_se_over_r_sd_grid.empty())
        throw std::domain_error("sweep grids must be nonempty");

    struct Point {
        double od, ratio;
    };
    std::vector<Point> points;
    for (double ratio : r_se_over_r_sd_grid)
        for (double od : od_grid) points.push_back({od, ratio});

    std::vector<std::array<SweepRow, 2>> slots(points.size());
    parallel_for(points.size(), threads, [&](std::size_t i) {
        ProtocolParams p = base;
        p.od = points[i].od;
        p.r_se = points[i].ratio * base.r_sd;
        for (Scheme s : {Scheme::one_pulse, Scheme::two_pulse}) {
            auto res = optimize_protocol(p, total_time, s, opts);
            SweepRow row;
            row.od = p.od;
            row.r_se_over_r_sd = points[i].ratio;
            row.scheme = s;
            row.plan = res.plan;
            row.var_rel_sql = res.field_variance_rel_sql;
            slots[i][s == Scheme::one_pulse ? 0 : 1] = row;
        }
    });

    std::vector<SweepRow> rows;
    rows.reserve(points.size() * 2);
    for (const auto& pair : slots) {
        rows.push_back(pair[0]);
        rows.push_back(pair[1]);
    }
    return rows;
}

std::string scheme_name(Scheme s) {
    return s == Scheme::one_pulse ? "one_pulse" : "two_pulse";
}

} // namespace sq::qnd
