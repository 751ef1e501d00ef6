#pragma once

#include <string>
#include <variant>
#include <vector>

namespace cavlock {

using Cell = std::variant<double, std::string>;

/// Tabular output. Numeric cells are written with 17 significant digits so
/// a write/read cycle reproduces them exactly.
struct CsvDataset {
  std::vector<std::string> metadata;  // written as `# ` lines
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  std::size_t column(const std::string& name) const;  // throws if absent
  double number(std::size_t row, const std::string& name) const;
  std::string text(std::size_t row, const std::string& name) const;
};

std::string format_number(double v);
void write_csv(const CsvDataset& data, std::ostream& out);
void write_csv(const CsvDataset& data, const std::string& path);
CsvDataset read_csv(const std::string& path);
CsvDataset parse_csv(const std::string& text);

}  // namespace cavlock
