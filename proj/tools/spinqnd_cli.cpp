// Command-line front end. Talks to the simulator exclusively through the
// shared library's C interface (spinqnd.h).

#include <cstdint>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "spinqnd.h"

namespace {

// Exit codes: 0 success, 2 config error, 3 numerical error, 1 anything else.
int exit_code_for(sq_status st) {
    switch (st) {
        case SQ_OK: return 0;
        case SQ_ERR_CONFIG: return 2;
        case SQ_ERR_INVALID_ARG: return 2;
        case SQ_ERR_NUMERIC: return 3;
        default: return 1;
    }
}

int fail(sq_status st) {
    std::fprintf(stderr, "error: %s\n", sq_last_error());
    return exit_code_for(st);
}

struct FreeString {
    char* s = nullptr;
    ~FreeString() { sq_string_free(s); }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"spinqnd — stroboscopic spin-noise and QND magnetometry simulator"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(sq_version()));

    std::string config_path, out_dir, csv_path;
    std::uint64_t seed = 0;
    long trajectories = 0;
    int threads = 0;
    bool seed_set = false;

    auto* run = app.add_subcommand("run", "execute the experiment selected by a config");
    run->add_option("--config", config_path, "config file (JSON)")->required();
    run->add_option("--seed", seed, "override the config seed")
        ->each([&](const std::string&) { seed_set = true; });
    run->add_option("--out", out_dir, "output directory (default: config output_dir)");
    run->add_option("--trajectories", trajectories, "override the trajectory count");
    run->add_option("--threads", threads, "worker threads (default: all cores)");

    auto* validate = app.add_subcommand("validate", "check a config without running it");
    validate->add_option("--config", config_path, "config file (JSON)")->required();

    auto* plotdata =
        app.add_subcommand("plotdata", "convert an experiment CSV to plot-ready files");
    plotdata->add_option("csv", csv_path, "experiment CSV")->required();
    plotdata->add_option("--out", out_dir, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) {
        sq_config* cfg = nullptr;
        sq_status st = sq_config_load_file(config_path.c_str(), &cfg);
        if (st != SQ_OK) return fail(st);

        sq_run_options opts{};
        opts.out_dir = out_dir.empty() ? nullptr : out_dir.c_str();
        opts.has_seed = seed_set ? 1 : 0;
        opts.seed = seed;
        opts.trajectories = trajectories;
        opts.threads = threads;

        FreeString manifest;
        st = sq_run(cfg, &opts, &manifest.s);
        sq_config_free(cfg);
        if (st != SQ_OK) return fail(st);
        std::fputs(manifest.s, stdout);
        return 0;
    }

    if (validate->parsed()) {
        FreeString diag;
        const sq_status st = sq_config_validate_file(config_path.c_str(), &diag.s);
        if (diag.s) std::fputs(diag.s, stderr);
        if (st != SQ_OK) return fail(st);

        sq_config* cfg = nullptr;
        if (sq_config_load_file(config_path.c_str(), &cfg) == SQ_OK) {
            FreeString effective;
            if (sq_config_effective_json(cfg, &effective.s) == SQ_OK) {
                std::fputs("ok\n", stdout);
                std::fputs(effective.s, stdout);
            }
            sq_config_free(cfg);
        }
        return 0;
    }

    if (plotdata->parsed()) {
        const sq_status st = sq_emit_plotdata(csv_path.c_str(), out_dir.c_str());
        if (st != SQ_OK) return fail(st);
        return 0;
    }

    return 1;
}
