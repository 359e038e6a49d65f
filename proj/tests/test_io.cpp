#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "spinqnd.h"
#include "spinqnd/config.hpp"
#include "spinqnd/csv.hpp"
#include "spinqnd/errors.hpp"
#include "spinqnd/experiments.hpp"
#include "spinqnd/plotdata.hpp"
#include "spinqnd/sha256.hpp"

namespace fs = std::filesystem;
using namespace sq;

namespace {

fs::path temp_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("spinqnd_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string tiny_config_json(const std::string& experiment, const fs::path& out) {
    return R"({
      "seed": 5,
      "trajectories": 4,
      "experiment": ")" + experiment + R"(",
      "ensemble": {"p0": 0.6, "n_atoms": 1e5, "r_sd_per_s": 20, "r_se_per_s": 8000},
      "dynamics": {"duration_s": 4e-4, "tau_d_s": 0, "ls_strength": 0.3},
      "strobe": {"duty": 0.25},
      "analysis": {"segment_len": 1024},
      "sweep": {"f_s_grid_hz": [2.9e5, 3.0e5], "duty_grid": [0.25, 0.8], "p_grid": [0, 0.6]},
      "protocol": {"od_grid": [100, 1000], "r_se_over_r_sd_grid": [0, 10]},
      "output_dir": ")" + out.string() + R"("
    })";
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("config: strict parsing and field-path diagnostics") {
    SUBCASE("unknown keys are rejected with their path") {
        try {
            io::load_config_string(R"({"strobe": {"dooty": 0.1}})");
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("strobe.dooty") != std::string::npos);
        }
    }
    SUBCASE("duty = 0 names strobe.duty") {
        try {
            io::load_config_string(R"({"strobe": {"duty": 0}})");
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(e.field_path() == "strobe.duty");
        }
    }
    SUBCASE("oversized dt cites the step-size rule") {
        try {
            io::load_config_string(R"({"dynamics": {"dt_s": 1e-3}})");
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("1/(40 max(f_L, f_s))") != std::string::npos);
        }
    }
    SUBCASE("parse failure is positioned") {
        CHECK_THROWS_AS(io::load_config_string("{nope"), ConfigError);
    }
    SUBCASE("short records warn but stay valid") {
        const auto cfg = io::load_config_string(
            R"({"dynamics": {"duration_s": 1e-5}, "ensemble": {"r_se_per_s": 100, "r_sd_per_s": 5}})");
        bool warned = false;
        for (const auto& d : io::validate_config(cfg))
            warned |= d.severity == io::Diagnostic::Severity::warning;
        CHECK(warned);
    }
}

TEST_CASE("config: round-trip is the identity on the effective config") {
    const auto dir = temp_dir("roundtrip");
    const auto cfg = io::load_config_string(tiny_config_json("psd", dir));
    const std::string once = io::effective_config_json(cfg);
    const auto reparsed = io::load_config_string(once);
    const std::string twice = io::effective_config_json(reparsed);
    CHECK(once == twice);
    CHECK(io::config_hash(cfg) == io::config_hash(reparsed));
}

TEST_CASE("csv formatting: 9 significant digits, LF endings") {
    io::Table t;
    t.header = {"a", "b"};
    t.rows.push_back({0.123456789123, std::string("x")});
    t.rows.push_back({3.0e5, std::string("y")});
    const std::string text = io::to_csv(t);
    CHECK(text == "a,b\n0.123456789,x\n300000,y\n");
    CHECK(text.find('\r') == std::string::npos);

    const auto dir = temp_dir("csv");
    io::write_csv(dir / "t.csv", t);
    const auto parsed = io::read_csv(dir / "t.csv");
    CHECK(parsed.header == std::vector<std::string>{"a", "b"});
    CHECK(io::parse_double(parsed.rows[0][0]) == doctest::Approx(0.123456789));
    CHECK(parsed.column("b") == 1);
    CHECK_THROWS_AS(parsed.column("c"), ConfigError);
}

TEST_CASE("experiment run writes CSVs and a reproducing manifest") {
    const auto dir = temp_dir("run_psd");
    const auto cfg = io::load_config_string(tiny_config_json("psd", dir));

    experiments::RunOptions opts;
    opts.threads = 2;
    const auto man = experiments::run(cfg, opts);

    CHECK(man.experiment == "psd");
    CHECK(man.seed == 5);
    REQUIRE(!man.outputs.empty());
    for (const auto& o : man.outputs) {
        const fs::path p = dir / o.name;
        CHECK(fs::exists(p));
        CHECK(io::sha256_file(p) == o.sha256);
        CHECK(fs::file_size(p) == o.bytes);
    }
    CHECK(fs::exists(dir / "run_manifest.json"));

    SUBCASE("same seed, different thread count: byte-identical CSVs") {
        const auto dir2 = temp_dir("run_psd_again");
        experiments::RunOptions o2;
        o2.threads = 1;
        o2.out_dir = dir2.string();
        const auto man2 = experiments::run(cfg, o2);
        REQUIRE(man2.outputs.size() == man.outputs.size());
        for (std::size_t i = 0; i < man.outputs.size(); ++i) {
            CHECK(man.outputs[i].name == man2.outputs[i].name);
            CHECK(man.outputs[i].sha256 == man2.outputs[i].sha256);
        }
    }
    SUBCASE("seed override changes the bytes") {
        const auto dir3 = temp_dir("run_psd_seeded");
        experiments::RunOptions o3;
        o3.out_dir = dir3.string();
        o3.has_seed = true;
        o3.seed = 6;
        const auto man3 = experiments::run(cfg, o3);
        CHECK(man3.outputs[0].sha256 != man.outputs[0].sha256);
    }
}

TEST_CASE("plotdata emission") {
    const auto dir = temp_dir("plotdata");

    SUBCASE("psd schema") {
        io::Table t;
        t.header = {"freq_hz", "psd_rad2_per_hz"};
        t.rows.push_back({1.0e3, 2.5e-12});
        t.rows.push_back({2.0e3, 2.6e-12});
        io::write_csv(dir / "psd.csv", t);
        const auto files = io::emit_plotdata(dir / "psd.csv", dir / "out");
        CHECK(files == std::vector<std::string>{"psd.dat", "psd.meta.json"});
        CHECK(slurp(dir / "out" / "psd.dat") == "1000 2.5e-12\n2000 2.6e-12\n");
    }
    SUBCASE("protocol schema groups by ratio and scheme") {
        io::Table t;
        t.header = {"od", "r_se_over_r_sd", "scheme", "eps1", "eps2", "t_m_s",
                    "var_rel_sql"};
        t.rows.push_back({30.0, 0.0, std::string("one_pulse"), 0.0, 1.0, 0.5, 2.7});
        t.rows.push_back({30.0, 0.0, std::string("two_pulse"), 1.0, 1.0, 0.1, 1.1});
        t.rows.push_back({100.0, 10.0, std::string("two_pulse"), 1.0, 1.0, 0.1, 1.2});
        io::write_csv(dir / "protocol_sweep.csv", t);
        const auto files = io::emit_plotdata(dir / "protocol_sweep.csv", dir / "out2");
        CHECK(std::count_if(files.begin(), files.end(), [](const std::string& f) {
                  return f.find(".dat") != std::string::npos;
              }) == 3);
        CHECK(fs::exists(dir / "out2" / "protocol_rse0_two_pulse.dat"));
        CHECK(fs::exists(dir / "out2" / "protocol_rse10_one_pulse.dat") == false);
    }
    SUBCASE("schema mismatch lists expected columns") {
        io::Table t;
        t.header = {"nope"};
        t.rows.push_back({1.0});
        io::write_csv(dir / "bad.csv", t);
        try {
            io::emit_plotdata(dir / "bad.csv", dir / "out3");
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("freq_hz,psd_rad2_per_hz") !=
                  std::string::npos);
        }
    }
    SUBCASE("empty CSV is an error, never empty outputs") {
        std::ofstream(dir / "empty.csv") << "freq_hz,psd_rad2_per_hz\n";
        CHECK_THROWS_AS(io::emit_plotdata(dir / "empty.csv", dir / "out4"), ConfigError);
        CHECK(!fs::exists(dir / "out4" / "psd.dat"));
    }
}

TEST_CASE("C API surface") {
    CHECK(std::string(sq_version()) == "0.1.0");

    SUBCASE("spin statistics passthrough") {
        double v = 0.0;
        CHECK(sq_spin_variance_per_atom(1.5, 0.0, &v) == SQ_OK);
        CHECK(v == doctest::Approx(1.5));
        CHECK(sq_spin_noise_ratio(1.5, 1.0, &v) == SQ_OK);
        CHECK(v == doctest::Approx(2.0 / 3.0));
        CHECK(sq_spin_beta_from_polarization(2.0, &v) == SQ_ERR_INVALID_ARG);
        CHECK(std::string(sq_last_error()).find("polarization") != std::string::npos);
    }
    SUBCASE("config load, effective echo, run") {
        const auto dir = temp_dir("capi_run");
        const std::string json = tiny_config_json("sweep_duty", dir);

        sq_config* cfg = nullptr;
        REQUIRE(sq_config_load_string(json.c_str(), &cfg) == SQ_OK);
        char* effective = nullptr;
        REQUIRE(sq_config_effective_json(cfg, &effective) == SQ_OK);
        CHECK(std::string(effective).find("\"experiment\": \"sweep_duty\"") !=
              std::string::npos);
        sq_string_free(effective);

        sq_run_options opts{};
        opts.threads = 2;
        char* manifest = nullptr;
        REQUIRE(sq_run(cfg, &opts, &manifest) == SQ_OK);
        CHECK(std::string(manifest).find("sweep_duty.csv") != std::string::npos);
        sq_string_free(manifest);
        sq_config_free(cfg);
        CHECK(fs::exists(dir / "sweep_duty.csv"));

        CHECK(sq_emit_plotdata((dir / "sweep_duty.csv").string().c_str(),
                               (dir / "plots").string().c_str()) == SQ_OK);
        CHECK(fs::exists(dir / "plots" / "duty_ratio.dat"));
    }
    SUBCASE("invalid config file reports diagnostics and SQ_ERR_CONFIG") {
        const auto dir = temp_dir("capi_validate");
        std::ofstream(dir / "bad.json")
            << R"({"strobe": {"duty": 0}, "ensemble": {"od": -1}})";
        char* diag = nullptr;
        CHECK(sq_config_validate_file((dir / "bad.json").string().c_str(), &diag) ==
              SQ_ERR_CONFIG);
        REQUIRE(diag != nullptr);
        const std::string report(diag);
        CHECK(report.find("strobe.duty") != std::string::npos);
        CHECK(report.find("ensemble.od") != std::string::npos);
        sq_string_free(diag);

        sq_config* cfg = nullptr;
        CHECK(sq_config_load_file((dir / "missing.json").string().c_str(), &cfg) ==
              SQ_ERR_CONFIG);
        CHECK(cfg == nullptr);
    }
    SUBCASE("protocol optimization through the C boundary") {
        sq_protocol_params p{};
        p.n_atoms = 1e10;
        p.gamma = 4.39822971502571e10;
        p.r_sd = 1.0;
        p.r_se = 0.0;
        p.od = 1e4;
        p.total_time = 1.0;
        p.p_init = 1.0;
        p.pulse_decoherence = 0.0;

        double sql = 0.0;
        CHECK(sq_protocol_sql_variance(&p, &sql) == SQ_OK);
        CHECK(sql > 0.0);

        sq_protocol_result res{};
        REQUIRE(sq_protocol_optimize(&p, SQ_SCHEME_ONE_PULSE, &res) == SQ_OK);
        CHECK(res.var_rel_sql == doctest::Approx(std::exp(1.0)).epsilon(0.01));
        CHECK(res.t_m == doctest::Approx(0.5).epsilon(0.02));
    }
}
