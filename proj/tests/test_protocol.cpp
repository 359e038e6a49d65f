#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "spinqnd/errors.hpp"
#include "spinqnd/qnd_protocol.hpp"
#include "spinqnd/rng.hpp"
#include "support/oracles.hpp"

using namespace sq::qnd;

namespace {

ProtocolParams reference_params() {
    ProtocolParams p;
    p.n_atoms = 1e10;
    p.gamma = 4.39822971502571e10;
    p.r_sd = 1.0;
    p.r_se = 0.0;
    p.od = 1e4;
    return p;
}

} // namespace

TEST_CASE("measurement_variance") {
    CHECK(measurement_variance(1.0, 1e12, 4.0) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(measurement_variance(1.0, 1.0, 4.0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(measurement_variance(0.01, 100.0, 4.0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK_THROWS_AS(measurement_variance(0.0, 1.0, 4.0), std::domain_error);
    CHECK_THROWS_AS(measurement_variance(1.0, -1.0, 4.0), std::domain_error);
}

TEST_CASE("integrated_rate") {
    RelaxationModel m{1.0, 100.0, 1.0};
    CHECK(integrated_rate(0.0, m) == 0.0);

    SUBCASE("constant-rate limit at zero polarization") {
        RelaxationModel u{2.0, 50.0, 0.0};
        CHECK(integrated_rate(0.7, u) == doctest::Approx((2.0 + 50.0) * 0.7).epsilon(1e-12));
    }
    SUBCASE("R_se -> 0 leaves R_sd t") {
        RelaxationModel u{3.0, 0.0, 1.0};
        CHECK(integrated_rate(0.5, u) == doctest::Approx(1.5).epsilon(1e-12));
    }
    SUBCASE("early-time suppression matches the series and quadrature oracle") {
        const double t = 1e-3;
        const double series = m.r_sd * t + m.r_se * m.r_sd * t * t / 2.0;
        CHECK(integrated_rate(t, m) == doctest::Approx(series).epsilon(1e-3));
        const double quad = oracle::simpson(
            [&](double u) {
                return m.r_sd + (1.0 - m.p_z0 * std::exp(-m.r_sd * u)) * m.r_se;
            },
            0.0, t);
        CHECK(integrated_rate(t, m) == doctest::Approx(quad).epsilon(1e-9));
    }
    SUBCASE("quadrature oracle across a time grid") {
        RelaxationModel w{2.5, 40.0, 0.8};
        for (double t : {0.01, 0.1, 0.5, 2.0}) {
            const double quad = oracle::simpson(
                [&](double u) {
                    return w.r_sd + (1.0 - w.p_z0 * std::exp(-w.r_sd * u)) * w.r_se;
                },
                0.0, t, 4000);
            CHECK(integrated_rate(t, w) == doctest::Approx(quad).epsilon(1e-9));
        }
    }
    SUBCASE("nondecreasing and convex-to-linear (R(t) nondecreasing)") {
        double prev = 0.0, prev_rate = -1.0;
        for (int k = 1; k <= 50; ++k) {
            const double t = 0.1 * k;
            const double v = integrated_rate(t, m);
            CHECK(v >= prev);
            const double rate = (v - prev) / 0.1; // mean of R over the slice
            CHECK(rate >= prev_rate - 1e-9);
            prev = v;
            prev_rate = rate;
        }
    }
}

TEST_CASE("covariance") {
    RelaxationModel m{1.0, 0.0, 1.0};
    CHECK(covariance(1e-12, 4.0, m, 0.0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(covariance(0.5, 4.0, m, 0.0) ==
          doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
    CHECK(covariance(1e-12, 4.0, m, 1.0) ==
          doctest::Approx(1.0 / std::exp(1.0)).epsilon(1e-9));

    SUBCASE("Monte Carlo atom-reset oracle confirms the e^{-eps1} convention") {
        sq::RandomStream rng(2024, 11);
        for (double eps1 : {0.5, 1.0}) {
            const double q = 0.3; // integrated relaxation between pulses
            const double mc = oracle::covariance_reset_mc(eps1, q, 200, 50000, rng);
            RelaxationModel constant{1.0, 0.0, 0.0};
            // pick t so integrated_rate = q with the constant rate
            const double expected = covariance(q, 1.0, constant, eps1);
            CHECK(mc == doctest::Approx(expected).epsilon(0.05));
        }
    }
    SUBCASE("implied correlation coefficient lies in [0, 1]") {
        sq::RandomStream rng(7, 7);
        for (int i = 0; i < 500; ++i) {
            const double eps1 = std::exp(rng.next_double() * 6.0 - 3.0);
            const double eps2 = std::exp(rng.next_double() * 6.0 - 3.0);
            const double od = std::exp(rng.next_double() * 9.0);
            const double rsd = std::exp(rng.next_double() * 4.0 - 2.0);
            const double rse = rsd * std::exp(rng.next_double() * 5.0);
            const double t = std::exp(rng.next_double() * 6.0 - 4.0) / rsd;
            RelaxationModel m2{rsd, rse, std::exp(-eps1)};
            const double cov = covariance(t, 4.0, m2, eps1);
            const double v1 = measurement_variance(eps1, od, 4.0);
            const double v2 = measurement_variance(eps2, od, 4.0);
            const double rho = cov / std::sqrt(v1 * v2);
            CHECK(rho >= 0.0);
            CHECK(rho <= 1.0);
        }
    }
}

TEST_CASE("sql_variance") {
    ProtocolParams p = reference_params();
    const double base = sql_variance(p, 1.0);
    p.n_atoms *= 2.0;
    CHECK(sql_variance(p, 1.0) == doctest::Approx(base / 2.0).epsilon(1e-12));
    p.n_atoms /= 2.0;
    CHECK(sql_variance(p, 2.0) == doctest::Approx(base / 2.0).epsilon(1e-12));

    // numeric-range smoke test at laboratory-scale numbers
    p.n_atoms = 1e10;
    p.r_sd = 1.0;
    const double v = sql_variance(p, 1.0);
    CHECK(std::isfinite(v));
    CHECK(v > 0.0);
}

TEST_CASE("two_pulse_field_variance limits") {
    ProtocolParams p = reference_params();

    SUBCASE("eps2 -> 0 diverges") {
        const double weak = two_pulse_field_variance({1.0, 1e-9, 0.1}, p, 1.0);
        const double strong = two_pulse_field_variance({1.0, 10.0, 0.1}, p, 1.0);
        CHECK(weak > 100.0 * strong);
    }
    SUBCASE("degenerate t_m stays finite") {
        const double v = two_pulse_field_variance({1.0, 1.0, 1e-300}, p, 1.0);
        CHECK(std::isfinite(v));
        CHECK(v > 1.0);
    }
    SUBCASE("precondition violations throw") {
        CHECK_THROWS_AS(two_pulse_field_variance({0.0, 1.0, 0.1}, p, 1.0),
                        std::domain_error);
        CHECK_THROWS_AS(two_pulse_field_variance({1.0, 1.0, 2.0}, p, 1.0),
                        std::domain_error);
    }
}

TEST_CASE("one-pulse optimum: e * SQL at t_m = 1/(2 R_sd)") {
    ProtocolParams p = reference_params();
    const auto res = optimize_protocol(p, 1.0, Scheme::one_pulse);
    CHECK(res.field_variance_rel_sql ==
          doctest::Approx(std::exp(1.0)).epsilon(0.01));
    CHECK(res.plan.t_m == doctest::Approx(0.5 / p.r_sd).epsilon(0.02));

    SUBCASE("spin exchange degrades the one-pulse scheme") {
        ProtocolParams q = p;
        q.r_se = 10.0 * q.r_sd;
        const auto worse = optimize_protocol(q, 1.0, Scheme::one_pulse);
        CHECK(worse.field_variance_rel_sql > std::exp(1.0) * 1.05);
    }
    SUBCASE("SQL-relative curve is invariant under scaling R_sd (R_se = 0)") {
        ProtocolParams q = p;
        q.r_sd = 2.0;
        const auto scaled = optimize_protocol(q, 1.0, Scheme::one_pulse);
        CHECK(scaled.field_variance_rel_sql ==
              doctest::Approx(res.field_variance_rel_sql).epsilon(1e-3));
        CHECK(scaled.plan.t_m == doctest::Approx(res.plan.t_m / 2.0).epsilon(0.02));
    }
}

TEST_CASE("two-pulse optimum recovers the SQL at large OD") {
    ProtocolParams p = reference_params();
    const auto res = optimize_protocol(p, 1.0, Scheme::two_pulse);
    CHECK(res.field_variance_rel_sql == doctest::Approx(1.0).epsilon(0.05));

    SUBCASE("optimizer is deterministic") {
        const auto again = optimize_protocol(p, 1.0, Scheme::two_pulse);
        CHECK(again.field_variance_rel_sql == res.field_variance_rel_sql);
        CHECK(again.plan.t_m == res.plan.t_m);
        CHECK(again.plan.eps1 == res.plan.eps1);
    }
    SUBCASE("result is stable under doubled multi-start density") {
        OptimizeOptions dense;
        dense.multistarts_per_axis = 4;
        const auto denser = optimize_protocol(p, 1.0, Scheme::two_pulse, dense);
        CHECK(denser.field_variance_rel_sql ==
              doctest::Approx(res.field_variance_rel_sql).epsilon(0.005));
    }
    SUBCASE("no free lunch: never significantly below the SQL") {
        sq::RandomStream rng(31, 5);
        for (int i = 0; i < 12; ++i) {
            ProtocolParams q = p;
            q.od = std::exp(rng.next_double() * 9.0 + 1.0);
            q.r_se = q.r_sd * std::floor(rng.next_double() * 100.0);
            const auto r = optimize_protocol(q, 1.0, Scheme::two_pulse);
            CHECK(r.field_variance_rel_sql >= 1.0 - 1e-6);
        }
    }
}

TEST_CASE("sweep_od ordering and monotonicity") {
    ProtocolParams p = reference_params();
    const std::vector<double> od_grid{30.0, 300.0, 3000.0};
    const std::vector<double> ratios{0.0, 10.0};
    const auto rows = sweep_od(p, od_grid, ratios, 1.0, 2);
    REQUIRE(rows.size() == od_grid.size() * ratios.size() * 2);

    for (std::size_t i = 0; i < rows.size(); i += 2) {
        CHECK(rows[i].scheme == Scheme::one_pulse);
        CHECK(rows[i + 1].scheme == Scheme::two_pulse);
        CHECK(rows[i + 1].var_rel_sql <= rows[i].var_rel_sql * (1.0 + 1e-9));
    }
    // two-pulse nonincreasing in OD within each ratio block
    for (std::size_t r = 0; r < ratios.size(); ++r) {
        for (std::size_t k = 1; k < od_grid.size(); ++k) {
            const auto& prev = rows[(r * od_grid.size() + k - 1) * 2 + 1];
            const auto& cur = rows[(r * od_grid.size() + k) * 2 + 1];
            CHECK(cur.var_rel_sql <= prev.var_rel_sql * (1.0 + 1e-6));
        }
    }
    CHECK_THROWS_AS(sweep_od(p, {}, ratios, 1.0, 1), std::domain_error);
}
