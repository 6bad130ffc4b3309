#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lcp::csv {

// Numeric cell format shared by every writer: "%.12g" with the literals
// inf / -inf / nan.
std::string format_double(double v);

// Inverse of format_double; throws invalid_argument on anything else.
double parse_double(const std::string& cell);

// Comma split with surrounding whitespace trimmed.  No quoting: the file
// formats here are purely numeric plus short identifiers.
std::vector<std::string> split_row(const std::string& line);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index by name, or -1 when absent.
  int column(const std::string& name) const;
};

// Reads header + data rows; rejects ragged rows with a line-addressed message.
Table read_table(std::istream& in);
Table read_table_file(const std::string& path);

void write_row(std::ostream& out, const std::vector<std::string>& cells);

}  // namespace lcp::csv
