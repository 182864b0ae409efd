#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace cvar_reach::csv {

/// Shortest round-trip-safe text for a double: 17 significant digits.
std::string format(double v);

/// Comma-joins already formatted fields and terminates with '\n'.
void write_row(std::ostream& out, const std::vector<std::string>& fields);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index by name; throws std::runtime_error when absent.
    std::size_t column(std::string_view name) const;
};

/// Reads a header-first comma-separated file. No quoting support: every file
/// this project writes is purely numeric.
Table read(const std::filesystem::path& path);

double to_double(const std::string& field);

} // namespace cvar_reach::csv
