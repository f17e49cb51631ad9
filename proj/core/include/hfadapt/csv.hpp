#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace hfadapt {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index by name; throws ValidationError when absent.
  std::size_t column(const std::string& name) const;
  double number(std::size_t row, const std::string& name) const;
};

// Shortest text that parses back to the same double; "nan"/"inf" for
// non-finite values.
std::string format_number(double v);
double parse_number(const std::string& text);

std::string to_csv(const CsvTable& table);
// Parses comma-separated text without quoting; every row must match the
// header width (ParseError with line number otherwise).
CsvTable parse_csv(const std::string& text);

void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

// Line-at-a-time writer for logs that grow during a run. Creates the file
// with `header`, then appends and flushes each row.
class CsvAppender {
 public:
  CsvAppender(const std::filesystem::path& path, const std::vector<std::string>& header);
  void append(const std::vector<std::string>& row);

 private:
  std::filesystem::path path_;
  std::size_t width_;
};

}  // namespace hfadapt
