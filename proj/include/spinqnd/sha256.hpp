#pragma once

#include <filesystem>
#include <string>

namespace sq::io {

/// SHA-256 digest as lowercase hex.
std::string sha256_hex(const std::string& bytes);

/// SHA-256 of a file's contents.
std::string sha256_file(const std::filesystem::path& path);

} // namespace sq::io
