#include "cavlock/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cavlock/error.hpp"

namespace cavlock {

std::size_t CsvDataset::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  throw Error(ErrorCode::ParseError, "no column named " + name);
}

double CsvDataset::number(std::size_t row, const std::string& name) const {
  const Cell& c = rows.at(row).at(column(name));
  if (const double* v = std::get_if<double>(&c)) return *v;
  throw Error(ErrorCode::ParseError, "column " + name + " is not numeric");
}

std::string CsvDataset::text(std::size_t row, const std::string& name) const {
  const Cell& c = rows.at(row).at(column(name));
  if (const auto* s = std::get_if<std::string>(&c)) return *s;
  return format_number(std::get<double>(c));
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

Cell parse_cell(const std::string& s) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return HUGE_VAL;
  if (s == "-inf") return -HUGE_VAL;
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (!s.empty() && res.ec == std::errc() && res.ptr == s.data() + s.size()) return v;
  return s;
}

}  // namespace

void write_csv(const CsvDataset& data, std::ostream& out) {
  for (const auto& m : data.metadata) out << "# " << m << '\n';
  for (std::size_t i = 0; i < data.columns.size(); ++i) {
    out << (i ? "," : "") << quote(data.columns[i]);
  }
  out << '\n';
  for (const auto& row : data.rows) {
    if (row.size() != data.columns.size()) {
      throw Error(ErrorCode::IoError, "row width does not match the header");
    }
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      if (const double* v = std::get_if<double>(&row[i])) {
        out << format_number(*v);
      } else {
        out << quote(std::get<std::string>(row[i]));
      }
    }
    out << '\n';
  }
}

void write_csv(const CsvDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  write_csv(data, out);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

CsvDataset parse_csv(const std::string& text) {
  CsvDataset data;
  std::istringstream in(text);
  std::string line;
  bool header = false;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      data.metadata.push_back(line.size() > 2 ? line.substr(2) : "");
      continue;
    }
    auto fields = split_row(line);
    if (!header) {
      data.columns = std::move(fields);
      header = true;
      continue;
    }
    if (fields.size() != data.columns.size()) {
      throw Error(ErrorCode::ParseError,
                  "line " + std::to_string(n) + ": expected " +
                      std::to_string(data.columns.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    std::vector<Cell> row;
    row.reserve(fields.size());
    for (const auto& f : fields) row.push_back(parse_cell(f));
    data.rows.push_back(std::move(row));
  }
  if (!header) throw Error(ErrorCode::ParseError, "CSV has no header row");
  return data;
}

CsvDataset read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

}  // namespace cavlock
