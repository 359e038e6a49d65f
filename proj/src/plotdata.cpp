#include "spinqnd/plotdata.hpp"

#include <array>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "spinqnd/csv.hpp"
#include "spinqnd/errors.hpp"

namespace sq::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Series {
    std::string file;
    std::string label;
    std::string style; // "solid" or "dashed"
};

void write_dat(const fs::path& path, const std::vector<std::array<double, 2>>& xy) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("", "cannot open " + path.string() + " for writing");
    for (const auto& row : xy)
        f << format_double(row[0]) << ' ' << format_double(row[1]) << '\n';
}

void write_sidecar(const fs::path& path, const std::string& title,
                   const std::string& xlabel, const std::string& ylabel,
                   const std::vector<Series>& series) {
    json j;
    j["title"] = title;
    j["xlabel"] = xlabel;
    j["ylabel"] = ylabel;
    j["series"] = json::array();
    for (const auto& s : series)
        j["series"].push_back({{"file", s.file}, {"label", s.label}, {"style", s.style}});
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("", "cannot open " + path.string() + " for writing");
    f << j.dump(2) << '\n';
}

bool header_is(const ParsedCsv& csv, const std::vector<std::string>& expect) {
    return csv.header == expect;
}

std::string trim_zeros(double v) { return format_double(v); }

} // namespace

std::vector<std::string> emit_plotdata(const fs::path& csv_path, const fs::path& out_dir) {
    const ParsedCsv csv = read_csv(csv_path);
    if (csv.rows.empty())
        throw ConfigError("", csv_path.string() + ": CSV has a header but no rows");
    fs::create_directories(out_dir);

    std::vector<std::string> written;
    auto emit_xy = [&](const std::string& name, std::size_t cx, std::size_t cy) {
        std::vector<std::array<double, 2>> xy;
        for (const auto& row : csv.rows)
            xy.push_back({parse_double(row[cx]), parse_double(row[cy])});
        write_dat(out_dir / name, xy);
        written.push_back(name);
    };

    if (header_is(csv, {"freq_hz", "psd_rad2_per_hz"})) {
        emit_xy("psd.dat", 0, 1);
        write_sidecar(out_dir / "psd.meta.json", "Polarimeter noise spectrum",
                      "frequency (Hz)", "PSD (rad^2/Hz)",
                      {{"psd.dat", "averaged PSD", "solid"}});
        written.push_back("psd.meta.json");
        return written;
    }

    if (header_is(csv, {"f_s_hz", "area_pol_rad2", "area_unpol_rad2", "ratio"})) {
        emit_xy("strobe_polarized.dat", 0, 1);
        emit_xy("strobe_unpolarized.dat", 0, 2);
        write_sidecar(out_dir / "sweep_strobe.meta.json",
                      "Spin-noise area vs strobe frequency", "strobe frequency (Hz)",
                      "noise area (rad^2)",
                      {{"strobe_polarized.dat", "polarized", "solid"},
                       {"strobe_unpolarized.dat", "unpolarized", "dashed"}});
        written.push_back("sweep_strobe.meta.json");
        return written;
    }

    if (header_is(csv, {"duty", "area_pol_rad2", "area_unpol_rad2", "ratio"})) {
        emit_xy("duty_ratio.dat", 0, 3);
        write_sidecar(out_dir / "sweep_duty.meta.json",
                      "Polarized/unpolarized noise ratio vs duty cycle", "duty cycle",
                      "noise ratio", {{"duty_ratio.dat", "measured ratio", "solid"}});
        written.push_back("sweep_duty.meta.json");
        return written;
    }

    if (header_is(csv, {"p", "area_rad2", "ratio_sim", "ratio_model"})) {
        emit_xy("polarization_sim.dat", 0, 2);
        emit_xy("polarization_model.dat", 0, 3);
        write_sidecar(out_dir / "sweep_polarization.meta.json",
                      "Noise ratio vs longitudinal polarization", "polarization",
                      "polarized/unpolarized noise ratio",
                      {{"polarization_sim.dat", "simulated", "solid"},
                       {"polarization_model.dat", "closed form", "dashed"}});
        written.push_back("sweep_polarization.meta.json");
        return written;
    }

    if (header_is(csv, {"od", "r_se_over_r_sd", "scheme", "eps1", "eps2", "t_m_s",
                        "var_rel_sql"})) {
        // One file per (spin-exchange ratio, scheme); two-pulse solid,
        // one-pulse dashed.
        std::map<std::pair<std::string, std::string>, std::vector<std::array<double, 2>>>
            groups;
        std::set<std::string> ratios;
        for (const auto& row : csv.rows) {
            const std::string ratio = trim_zeros(parse_double(row[1]));
            ratios.insert(ratio);
            groups[{ratio, row[2]}].push_back(
                {parse_double(row[0]), parse_double(row[6])});
        }
        std::vector<Series> series;
        for (const auto& [key, xy] : groups) {
            std::string ratio_tag = key.first;
            for (auto& c : ratio_tag)
                if (c == '.' || c == '+' || c == '-') c = '_';
            const std::string name = "protocol_rse" + ratio_tag + "_" + key.second + ".dat";
            write_dat(out_dir / name, xy);
            written.push_back(name);
            series.push_back({name, "R_se/R_sd = " + key.first + ", " + key.second,
                              key.second == "two_pulse" ? "solid" : "dashed"});
        }
        write_sidecar(out_dir / "protocol_sweep.meta.json",
                      "Field variance relative to SQL vs optical density",
                      "optical density", "variance / SQL", series);
        written.push_back("protocol_sweep.meta.json");
        return written;
    }

    throw ConfigError(
        "", csv_path.string() +
                ": unrecognized CSV schema; expected one of: "
                "(freq_hz,psd_rad2_per_hz), "
                "(f_s_hz,area_pol_rad2,area_unpol_rad2,ratio), "
                "(duty,area_pol_rad2,area_unpol_rad2,ratio), "
                "(p,area_rad2,ratio_sim,ratio_model), "
                "(od,r_se_over_r_sd,scheme,eps1,eps2,t_m_s,var_rel_sql)");
}

} // namespace sq::io
