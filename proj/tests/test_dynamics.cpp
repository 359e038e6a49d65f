#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "spinqnd/dynamics.hpp"
#include "spinqnd/errors.hpp"
#include "spinqnd/polarimeter.hpp"
#include "support/oracles.hpp"

using namespace sq::dyn;
using sq::spin::AtomSpec;

namespace {

EnsembleParams potassium(double p0) {
    EnsembleParams e;
    e.atom = AtomSpec{1.5};
    e.n_atoms = 1e6;
    e.p0 = p0;
    e.r_sd = 10.0;
    e.r_se = 1.5e4;
    e.od = 1e4;
    return e;
}

// Ensemble+time variance of F_x across records (process is zero-mean).
double records_variance(const std::vector<Record>& recs, double* se_out = nullptr) {
    std::vector<double> per_traj;
    for (const auto& r : recs) {
        double acc = 0.0;
        for (double v : r.f_x) acc += v * v;
        per_traj.push_back(acc / static_cast<double>(r.f_x.size()));
    }
    const double m = oracle::mean(per_traj);
    if (se_out)
        *se_out = std::sqrt(oracle::variance(per_traj) /
                            static_cast<double>(per_traj.size()));
    return m;
}

} // namespace

TEST_CASE("relaxation_rate") {
    EnsembleParams e = potassium(0.0);
    e.r_sd = 10.0;
    e.r_se = 1000.0;
    CHECK(relaxation_rate(1.0, e) == doctest::Approx(10.0).epsilon(1e-14));
    CHECK(relaxation_rate(0.0, e) == doctest::Approx(1010.0).epsilon(1e-14));
    CHECK(relaxation_rate(0.5, e) == doctest::Approx(510.0).epsilon(1e-14));
    CHECK_THROWS_AS(relaxation_rate(1.5, e), std::domain_error);
}

TEST_CASE("strobe_gate") {
    StrobeWaveform s;
    s.f_s = 3.0e5;
    s.duty = 0.1;
    s.phi0 = 0.0;
    s.avg_flux = 2.0;

    CHECK(strobe_gate(0.0, s).on == 1); // window starts at t = 0
    CHECK(strobe_gate(0.0, s).instantaneous_flux == doctest::Approx(20.0));
    CHECK(strobe_gate(0.5 / s.f_s, s).on == 0);

    SUBCASE("duty = 1 is a continuous probe") {
        StrobeWaveform c = s;
        c.duty = 1.0;
        for (int i = 0; i < 100; ++i) {
            const auto g = strobe_gate(i * 1.7e-7, c);
            CHECK(g.on == 1);
            CHECK(g.instantaneous_flux == doctest::Approx(c.avg_flux));
        }
    }
    SUBCASE("flux averages to avg_flux over one period") {
        const int n = 100000;
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
            acc += strobe_gate(i / (n * s.f_s), s).instantaneous_flux;
        CHECK(acc / n == doctest::Approx(s.avg_flux).epsilon(1e-3));
    }
    SUBCASE("phi0 = pi shifts the window by half a period") {
        StrobeWaveform shifted = s;
        shifted.phi0 = M_PI;
        for (int i = 0; i < 200; ++i) {
            const double t = i * 3.3e-8;
            CHECK(strobe_gate(t, shifted).on == strobe_gate(t + 0.5 / s.f_s, s).on);
        }
    }
}

TEST_CASE("step: precession conserves the transverse amplitude") {
    // noise and relaxation off: quality gate for the integrator
    EnsembleParams e = potassium(0.0);
    e.r_sd = 1e-12;
    e.r_se = 0.0;
    DynamicsConfig cfg;
    cfg.f_l = 1.5e5;
    cfg.tau_d = 0.0;
    cfg.ls_strength = 0.0;
    StrobeWaveform s;
    s.f_s = 3.0e5;
    const double dt = 1.0 / (40.0 * s.f_s);

    sq::RandomStream rng(1, 1);
    TrajectoryState st;
    st.f_x = e.n_atoms / 2.0;
    st.f_y = 0.0;
    st.f_z = 0.0;
    const double r0 = st.f_x * st.f_x + st.f_y * st.f_y;

    const int periods = 1000;
    const int steps_per_period = static_cast<int>(std::round(1.0 / (cfg.f_l * dt)));
    for (int i = 0; i < periods * steps_per_period; ++i)
        st = step(st, dt, cfg, e, s, rng);

    const double r1 = st.f_x * st.f_x + st.f_y * st.f_y;
    CHECK(std::abs(r1 / r0 - 1.0) < 1e-6);
    // integer number of periods: the state returns to its start
    CHECK(st.f_x == doctest::Approx(e.n_atoms / 2.0).epsilon(1e-6));
}

TEST_CASE("step: F_z relaxes with R_sd only, or holds under pumping") {
    EnsembleParams e = potassium(0.8);
    DynamicsConfig cfg;
    cfg.f_l = 1.5e5;
    StrobeWaveform s;
    sq::RandomStream rng(2, 2);

    TrajectoryState st;
    st.f_z = e.p0 * e.n_atoms / 2.0;
    const double dt = 1e-6;
    TrajectoryState next = step(st, dt, cfg, e, s, rng);
    CHECK(next.f_z == doctest::Approx(st.f_z * std::exp(-e.r_sd * dt)).epsilon(1e-12));

    cfg.pump_hold = true;
    next = step(st, dt, cfg, e, s, rng);
    CHECK(next.f_z == st.f_z);
}

TEST_CASE("fluctuation-dissipation pins the stationary variance") {
    StrobeWaveform s;
    s.f_s = 3.0e5;
    s.duty = 1.0;
    DynamicsConfig cfg;
    cfg.f_l = 1.5e5;
    cfg.duration = 3.6e-3;
    cfg.tau_d = 0.0;
    cfg.ls_strength = 0.0;
    cfg.seed = 77;

    SUBCASE("unpolarized, no diffusion") {
        EnsembleParams e = potassium(0.0);
        const auto recs = simulate_record(cfg, e, s, 60, 2);
        double se = 0.0;
        const double var = records_variance(recs, &se);
        const double expected =
            e.n_atoms * sq::spin::variance_per_atom(e.atom, 0.0);
        CHECK(std::abs(var - expected) < 3.0 * se);
        CHECK(se < 0.1 * expected);
    }
    SUBCASE("polarized with pump hold and finite diffusion time") {
        EnsembleParams e = potassium(0.6);
        cfg.pump_hold = true;
        cfg.tau_d = 3e-4;
        const auto recs = simulate_record(cfg, e, s, 60, 2);
        double se = 0.0;
        const double var = records_variance(recs, &se);
        const double expected =
            e.n_atoms * sq::spin::variance_per_atom(e.atom, 0.6);
        CHECK(std::abs(var - expected) < 3.0 * se);
    }
}

TEST_CASE("simulate_record determinism") {
    EnsembleParams e = potassium(0.3);
    StrobeWaveform s;
    DynamicsConfig cfg;
    cfg.duration = 1.0e-3;
    cfg.seed = 4242;

    const auto a = simulate_record(cfg, e, s, 6, 1);
    const auto b = simulate_record(cfg, e, s, 6, 2);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].f_x == b[i].f_x); // bit-identical across thread counts
        CHECK(a[i].t == b[i].t);
    }

    DynamicsConfig other = cfg;
    other.seed = 4243;
    const auto c = simulate_record(other, e, s, 6, 1);
    CHECK(c[0].f_x != a[0].f_x);
}

TEST_CASE("polarized spin-noise line is much narrower than unpolarized") {
    StrobeWaveform s;
    s.duty = 1.0;
    DynamicsConfig cfg;
    cfg.duration = 3.6e-3;
    cfg.seed = 11;
    cfg.tau_d = 0.0;

    auto hwhm_at = [&](double p0, bool hold) {
        EnsembleParams e = potassium(p0);
        DynamicsConfig c = cfg;
        c.pump_hold = hold;
        sq::pol::PsdAccumulator acc;
        const auto recs = simulate_record(c, e, s, 24, 2);
        for (const auto& r : recs)
            acc.add(sq::pol::welch_psd(r.f_x, 8192, sq::pol::Window::hann,
                                       r.sample_rate));
        const auto psd = acc.average();
        const auto fit = sq::pol::fit_lorentzian(psd, {0.5e5, 2.5e5});
        return fit.hwhm;
    };

    const double w_unpol = hwhm_at(0.0, false);
    const double w_pol = hwhm_at(0.95, true);
    CHECK(w_pol < 0.3 * w_unpol);
}

TEST_CASE("finite diffusion time bends the line away from a single Lorentzian") {
    StrobeWaveform s;
    s.duty = 1.0;
    EnsembleParams e = potassium(0.0);
    DynamicsConfig cfg;
    cfg.duration = 14.4e-3;
    cfg.seed = 13;
    // decimate to a 750 kHz grid so the 2.4 kHz line spans many PSD bins
    cfg.sample_stride = 16;

    auto residual_at = [&](double tau_d) {
        DynamicsConfig c = cfg;
        c.tau_d = tau_d;
        sq::pol::PsdAccumulator acc;
        const auto recs = simulate_record(c, e, s, 64, 2);
        for (const auto& r : recs)
            acc.add(sq::pol::welch_psd(r.f_x, 2048, sq::pol::Window::hann,
                                       r.sample_rate));
        const auto fit = sq::pol::fit_lorentzian(acc.average(), {0.7e5, 2.3e5});
        return fit.rms_residual_rel;
    };

    const double with_diffusion = residual_at(2.0e-4);
    const double without = residual_at(0.0);
    CHECK(with_diffusion > 2.0 * without);
}

TEST_CASE("back-action leaves unpolarized noise untouched") {
    // F_z = 0 for an unpolarized start, so the light-shift field has nothing
    // to rotate into F_y.
    StrobeWaveform s;
    s.f_s = 3.0e5;
    s.duty = 0.1;
    EnsembleParams e = potassium(0.0);
    DynamicsConfig cfg;
    cfg.duration = 2.0e-3;
    cfg.seed = 21;
    cfg.tau_d = 0.0;

    cfg.ls_strength = 0.0;
    const auto base = simulate_record(cfg, e, s, 40, 2);
    cfg.ls_strength = 1.0;
    const auto kicked = simulate_record(cfg, e, s, 40, 2);

    double se_a = 0.0, se_b = 0.0;
    const double va = records_variance(base, &se_a);
    const double vb = records_variance(kicked, &se_b);
    CHECK(std::abs(va - vb) < 3.0 * std::sqrt(se_a * se_a + se_b * se_b));
}

TEST_CASE("step-size rule and sampling stride") {
    StrobeWaveform s;
    s.f_s = 3.0e5;
    DynamicsConfig cfg;
    cfg.f_l = 1.5e5;

    CHECK_THROWS_AS(check_step_size(1.0e-4, cfg, s), sq::ConfigError);
    CHECK_NOTHROW(check_step_size(1.0 / (40.0 * 3.0e5), cfg, s));

    cfg.dt = 0.0;
    s.duty = 0.1;
    const double dt = effective_dt(cfg, s);
    CHECK(dt <= 1.0 / (40.0 * 3.0e5) * (1.0 + 1e-12));
    // at least 5 samples per on-window
    CHECK(dt <= s.duty / (5.0 * s.f_s) * (1.0 + 1e-12));

    cfg.duration = 5.0e-4;
    cfg.sample_stride = 4;
    EnsembleParams e = potassium(0.0);
    const auto recs = simulate_record(cfg, e, s, 2, 1);
    CHECK(recs[0].sample_rate == doctest::Approx(1.0 / (dt * 4.0)));
    CHECK(recs[0].t.size() == recs[0].gate.size());
}
