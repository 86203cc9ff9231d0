#pragma once

#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hetmarket {

/// Shortest round-trip decimal representation; "nan"/"inf" for non-finite.
std::string format_double(double value);

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Minimal RFC-4180 writer. Fields containing separators, quotes or line
/// breaks are quoted.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  void header(std::initializer_list<std::string_view> names);
  void header(const std::vector<std::string>& names);

  CsvWriter& field(std::string_view text);
  CsvWriter& field(double value);
  CsvWriter& field(std::int64_t value);
  CsvWriter& field(int value) { return field(static_cast<std::int64_t>(value)); }
  void end_row();

 private:
  std::ostream& out_;
  bool first_in_row_ = true;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// 1-based line number in the source for each row (for diagnostics).
  std::vector<std::size_t> line_numbers;

  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
  double number(std::size_t row, std::size_t col) const;
  std::int64_t integer(std::size_t row, std::size_t col) const;
};

CsvTable read_csv(std::istream& in, std::string_view source_name = "<csv>");
CsvTable read_csv_file(const std::string& path);

}  // namespace hetmarket
