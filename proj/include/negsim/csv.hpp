#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace negsim {

// Shortest round-trip decimal representation; locale independent.
std::string format_number(double value);

// Splits one CSV line on commas (no quoting; every file here is numeric or
// identifier-valued).
std::vector<std::string> split_csv_line(std::string_view line);

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::string_view header);

  void row(std::string_view line);
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

}  // namespace negsim
