#include "cpredict/csv.hpp"

#include <charconv>
#include <stdexcept>
#include <system_error>

namespace cpredict {

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw std::runtime_error(source.string() + ": missing column '" + std::string(name) + "'");
}

std::vector<std::string> split_csv_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      fields.emplace_back(line.substr(start));
      break;
    }
    fields.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  for (auto& f : fields) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = (b == std::string::npos) ? std::string{} : f.substr(b, e - b + 1);
  }
  return fields;
}

CsvTable read_csv(const std::filesystem::path& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path.string());
  CsvTable table;
  table.source = path;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    if (first && has_header) {
      table.header = std::move(fields);
    } else {
      table.rows.push_back(std::move(fields));
    }
    first = false;
  }
  return table;
}

double parse_double(std::string_view text, std::string_view context) {
  double value = 0.0;
  const auto* begin = text.data();
  const auto* end = text.data() + text.size();
  if (!text.empty() && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) {
    throw std::invalid_argument("cannot parse number '" + std::string(text) + "' at " +
                                std::string(context));
  }
  return value;
}

long long parse_int(std::string_view text, std::string_view context) {
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw std::invalid_argument("cannot parse integer '" + std::string(text) + "' at " +
                                std::string(context));
  }
  return value;
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, ptr);
}

CsvWriter::CsvWriter(const std::filesystem::path& path) : path_(path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw std::runtime_error("cannot write file: " + path.string());
}

CsvWriter& CsvWriter::header(const std::vector<std::string>& columns) {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) out_ << ',';
    out_ << columns[i];
  }
  out_ << '\n';
  return *this;
}

void CsvWriter::close() {
  out_.close();
  if (out_.fail()) throw std::runtime_error("write failed: " + path_.string());
}

}  // namespace cpredict
