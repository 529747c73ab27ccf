#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace nesht {

// Shortest decimal that round-trips to the identical double ('.' separator,
// locale-independent). All numeric artifact output goes through this.
std::string format_double(double x);
// Strict parse of the full token; throws std::invalid_argument on leftovers.
double parse_double(std::string_view s);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::string& path);

// Writes to <path>.tmp in the same directory, then renames over path, so
// readers never observe a torn file.
void write_file_atomic(const std::string& path, const std::string& content);
void write_csv_atomic(const std::string& path, const CsvTable& table);

}  // namespace nesht
