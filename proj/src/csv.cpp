#include "casimir/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "casimir/errors.hpp"

namespace casimir::csv {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::filesystem::path& path, std::size_t line_no) {
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || !std::isfinite(v)) {
    throw DataError(fmt::format("{}:{}: not a finite number: '{}'", path.string(), line_no, s));
  }
  return v;
}

}  // namespace

std::size_t Table::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw DataError("missing CSV column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

std::vector<double> Table::values(const std::string& name) const {
  const auto c = column(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[c]);
  return out;
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  Table t;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto s = trim(line);
    if (s.empty()) continue;
    if (s.front() == '#') {
      const auto body = trim(std::string_view(s).substr(1));
      if (const auto eq = body.find('='); eq != std::string::npos) {
        t.metadata[trim(std::string_view(body).substr(0, eq))] =
            trim(std::string_view(body).substr(eq + 1));
      }
      continue;
    }
    auto cells = split(s);
    if (!have_header) {
      t.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw DataError(fmt::format("{}:{}: expected {} columns, got {}", path.string(), line_no,
                                  t.header.size(), cells.size()));
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_double(c, path, line_no));
    t.rows.push_back(std::move(row));
  }
  if (!have_header) throw DataError(path.string() + ": missing header row");
  return t;
}

Table read(const std::filesystem::path& path, const std::vector<std::string>& expected) {
  auto t = read(path);
  if (t.header != expected) {
    std::string want;
    for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
    throw DataError(path.string() + ": header must be '" + want + "'");
  }
  return t;
}

std::string format_number(double v) {
  if (v == 0.0) return "0";
  return fmt::format("{}", v);  // shortest form that round-trips
}

void write(const std::filesystem::path& path, const std::vector<std::string>& header,
           const std::vector<std::vector<double>>& rows,
           const std::map<std::string, std::string>& metadata) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& [k, v] : metadata) out << "# " << k << '=' << v << '\n';
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << format_number(r[i]);
    out << '\n';
  }
}

}  // namespace casimir::csv
