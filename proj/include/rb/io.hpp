#pragma once

// CSV with full double precision (17 significant digits, LF endings, header
// row mandatory) and JSON sidecars; outputs are meant to be bit-exact
// reproducible across runs.

#include <fstream>
#include <string>
#include <vector>

#include "rb/errors.hpp"

namespace rb {

std::string format_double(double x);  // %.17g

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  void row(const std::vector<double>& values);
  void row_mixed(const std::vector<std::string>& cells);
  long rows_written() const { return rows_; }

 private:
  std::ofstream out_;
  size_t width_;
  long rows_ = 0;
};

void write_text_file(const std::string& path, const std::string& content);

}  // namespace rb
