#include "cvar_reach/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cvar_reach::csv {

std::string format(double v) {
    char buf[40];
    const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf, static_cast<std::size_t>(n));
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0)
            out << ',';
        out << fields[i];
    }
    out << '\n';
}

std::size_t Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name)
            return i;
    throw std::runtime_error("csv: missing column '" + std::string(name) + "'");
}

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ','))
        out.push_back(field);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

} // namespace

Table read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("csv: cannot open " + path.string());
    Table t;
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("csv: empty file " + path.string());
    t.header = split(line);
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        auto row = split(line);
        if (row.size() != t.header.size())
            throw std::runtime_error("csv: ragged row in " + path.string());
        t.rows.push_back(std::move(row));
    }
    return t;
}

double to_double(const std::string& field) {
    double v = 0.0;
    const auto* first = field.data();
    const auto* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last)
        throw std::runtime_error("csv: not a number: '" + field + "'");
    return v;
}

} // namespace cvar_reach::csv
