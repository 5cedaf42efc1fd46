#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "riskbound/bounds.hpp"
#include "riskbound/matrix_bounds.hpp"
#include "riskbound/optimize.hpp"

namespace riskbound {

// Schema: flavor,h,s,y,value,numerator,denominator,status. h, s, and y come
// from the result's meta map; absent quantities are empty cells. Numbers are
// rendered with `precision` significant digits.
void write_bound_csv(std::ostream& os, const BoundResult& r, int precision);

// Schema: h,s,flavor,value,numerator,denominator,status.
void write_sweep_csv(std::ostream& os, const SweepTable& table, int precision);

// Header q,r then the dimensions, then the entries row-major.
void write_matrix_csv(std::ostream& os, const Mat& M, int precision);

struct ParsedCsv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// Splits on commas and newlines; cells are plain tokens (no quoting in any
// schema this library emits).
ParsedCsv parse_csv(std::istream& is);

}  // namespace riskbound
