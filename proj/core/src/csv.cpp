#include "hfadapt/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hfadapt/error.hpp"

namespace hfadapt {

namespace {

std::string join(const std::vector<std::string>& cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) line += ',';
    if (cells[i].find_first_of(",\n") != std::string::npos) {
      throw ContractViolation("CSV cell contains a separator: " + cells[i]);
    }
    line += cells[i];
  }
  return line;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw ValidationError("CSV has no column '" + name + "'");
}

double CsvTable::number(std::size_t row, const std::string& name) const {
  return parse_number(rows.at(row).at(column(name)));
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_number(const std::string& text) {
  if (text == "nan") return std::nan("");
  if (text == "inf") return INFINITY;
  if (text == "-inf") return -INFINITY;
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ValidationError("not a number: '" + text + "'");
  }
  return v;
}

std::string to_csv(const CsvTable& table) {
  std::string out = join(table.header) + "\n";
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) throw ContractViolation("CSV row width mismatch");
    out += join(row) + "\n";
  }
  return out;
}

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  std::uint64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw ParseError("CSV row has " + std::to_string(cells.size()) + " cells, header has " +
                           std::to_string(t.header.size()),
                       lineno);
    }
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw ParseError("CSV is empty", 1);
  return t;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << to_csv(table);
  if (!out) throw Error("write failed for " + path.string());
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

CsvAppender::CsvAppender(const std::filesystem::path& path, const std::vector<std::string>& header)
    : path_(path), width_(header.size()) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path_, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path_.string());
  out << join(header) << '\n';
}

void CsvAppender::append(const std::vector<std::string>& row) {
  if (row.size() != width_) throw ContractViolation("CSV row width mismatch");
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  out << join(row) << '\n';
  out.flush();
  if (!out) throw Error("append failed for " + path_.string());
}

}  // namespace hfadapt
