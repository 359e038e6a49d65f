#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace sq::io {

/// Converts an experiment CSV into gnuplot-style column files plus a JSON
/// sidecar describing axes and series styles. The experiment is recognized
/// from the CSV header; a header that matches no experiment raises a
/// ConfigError listing the expected columns. Returns the files written
/// (relative to out_dir, sidecar last).
std::vector<std::string> emit_plotdata(const std::filesystem::path& csv_path,
                                       const std::filesystem::path& out_dir);

} // namespace sq::io
