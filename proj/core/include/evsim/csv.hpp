#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace evsim {

// Minimal CSV reader: header row with named columns, comma separation,
// double-quote escaping. Enough for TLC trip-record exports.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in);

  // Column index for a header name, or -1.
  int column(const std::string& name) const;

  // Reads the next row into `fields`; returns false at end of input.
  // Blank lines are skipped.
  bool next(std::vector<std::string>& fields);

  const std::vector<std::string>& header() const { return header_; }

 private:
  std::istream& in_;
  std::vector<std::string> header_;
};

std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace evsim
