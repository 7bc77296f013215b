#pragma once

// Minimal numeric CSV I/O: one header row, '#' comment lines, comma
// separated doubles. Comment lines of the form "# key=value" are kept as
// metadata.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace casimir::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::map<std::string, std::string> metadata;

  std::size_t column(const std::string& name) const;  // throws DataError when absent
  std::vector<double> values(const std::string& name) const;
};

/// Throws DataError on missing files, missing header, ragged or non-numeric rows.
Table read(const std::filesystem::path& path);
/// Requires `expected` to be a prefix-free exact match of the header.
Table read(const std::filesystem::path& path, const std::vector<std::string>& expected);

/// Formats with 10 significant digits so outputs re-parse without visible loss
/// and are byte-stable across runs.
std::string format_number(double v);

void write(const std::filesystem::path& path, const std::vector<std::string>& header,
           const std::vector<std::vector<double>>& rows,
           const std::map<std::string, std::string>& metadata = {});

}  // namespace casimir::csv
