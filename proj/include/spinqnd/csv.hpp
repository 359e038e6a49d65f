#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace sq::io {

/// One CSV cell: numeric cells are rendered as IEEE-754 doubles with
/// 9 significant digits, text cells verbatim.
using Cell = std::variant<double, std::string>;

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<Cell>> rows;
};

/// Formats a double with 9 significant digits ("%.9g", C locale).
std::string format_double(double v);

/// Serializes a table: header row, comma separators, LF line endings.
std::string to_csv(const Table& table);

void write_csv(const std::filesystem::path& path, const Table& table);

/// Parses a CSV produced by write_csv. Cells are kept as text; use
/// parse_double for numeric columns. Throws ConfigError on ragged rows or an
/// empty file.
struct ParsedCsv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Index of a header column; throws ConfigError when missing.
    std::size_t column(const std::string& name) const;
};

ParsedCsv read_csv(const std::filesystem::path& path);

double parse_double(const std::string& cell);

} // namespace sq::io
