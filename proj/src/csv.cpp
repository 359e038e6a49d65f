#include "spinqnd/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "spinqnd/errors.hpp"

namespace sq::io {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::string to_csv(const Table& table) {
    std::string out;
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        if (i) out += ',';
        out += table.header[i];
    }
    out += '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            if (std::holds_alternative<double>(row[i]))
                out += format_double(std::get<double>(row[i]));
            else
                out += std::get<std::string>(row[i]);
        }
        out += '\n';
    }
    return out;
}

void write_csv(const std::filesystem::path& path, const Table& table) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("", "cannot open " + path.string() + " for writing");
    const std::string text = to_csv(table);
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw ConfigError("", "failed writing " + path.string());
}

std::size_t ParsedCsv::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw ConfigError("", "CSV is missing expected column '" + name + "'");
}

ParsedCsv read_csv(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("", "cannot open " + path.string());
    ParsedCsv out;
    std::string line;
    bool first = true;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (line.back() == ',') cells.emplace_back();
        if (first) {
            out.header = std::move(cells);
            first = false;
        } else {
            if (cells.size() != out.header.size())
                throw ConfigError("", path.string() + ": ragged CSV row");
            out.rows.push_back(std::move(cells));
        }
    }
    if (first) throw ConfigError("", path.string() + ": empty CSV");
    return out;
}

double parse_double(const std::string& cell) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(cell, &pos);
    } catch (const std::exception&) {
        throw ConfigError("", "not a number: '" + cell + "'");
    }
    if (pos != cell.size())
        throw ConfigError("", "trailing characters in numeric cell: '" + cell + "'");
    return v;
}

} // namespace sq::io
