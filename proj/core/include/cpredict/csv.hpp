#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace cpredict {

/// Rows of a comma-separated file. Quoting is not supported; every file this
/// project reads or writes is plain numeric or identifier data.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column, or throws naming the file and column.
  std::size_t column(std::string_view name) const;
  std::filesystem::path source;
};

/// Split one line on commas; trailing '\r' is stripped.
std::vector<std::string> split_csv_line(std::string_view line);

/// Reads a CSV file. When `has_header` is false every line lands in `rows`.
CsvTable read_csv(const std::filesystem::path& path, bool has_header = true);

/// Parses a decimal float, throwing std::invalid_argument with `context` on failure.
double parse_double(std::string_view text, std::string_view context);
long long parse_int(std::string_view text, std::string_view context);

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path);

  CsvWriter& header(const std::vector<std::string>& columns);

  template <typename... Fields>
  CsvWriter& row(const Fields&... fields) {
    bool first = true;
    ((write_field(fields, first)), ...);
    out_ << '\n';
    return *this;
  }

  void close();

 private:
  void separator(bool& first) {
    if (!first) out_ << ',';
    first = false;
  }
  void write_field(const std::string& s, bool& first) { separator(first); out_ << s; }
  void write_field(std::string_view s, bool& first) { separator(first); out_ << s; }
  void write_field(const char* s, bool& first) { separator(first); out_ << s; }
  void write_field(double v, bool& first) { separator(first); out_ << format_double(v); }
  void write_field(int v, bool& first) { separator(first); out_ << v; }
  void write_field(long v, bool& first) { separator(first); out_ << v; }
  void write_field(long long v, bool& first) { separator(first); out_ << v; }
  void write_field(unsigned v, bool& first) { separator(first); out_ << v; }
  void write_field(unsigned long v, bool& first) { separator(first); out_ << v; }
  void write_field(unsigned long long v, bool& first) { separator(first); out_ << v; }

  std::filesystem::path path_;
  std::ofstream out_;
};

}  // namespace cpredict
