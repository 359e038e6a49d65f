#pragma once

#include <stdexcept>
#include <string>

namespace sq {

/// Raised when a run configuration violates the schema or an invariant.
/// `field_path` points at the offending entry, e.g. "strobe.duty".
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field_path, const std::string& what)
        : std::runtime_error(field_path.empty() ? what : field_path + ": " + what),
          field_path_(std::move(field_path)) {}

    const std::string& field_path() const noexcept { return field_path_; }

private:
    std::string field_path_;
};

/// Raised when a numerical stage fails (non-finite state, diverged
/// optimization, ...). `module_name` identifies the stage for diagnostics.
class NumericError : public std::runtime_error {
public:
    NumericError(std::string module_name, const std::string& what)
        : std::runtime_error("[" + module_name + "] " + what),
          module_(std::move(module_name)) {}

    const std::string& module_name() const noexcept { return module_; }

private:
    std::string module_;
};

} // namespace sq
