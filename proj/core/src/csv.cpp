#include "riskbound/csv.hpp"

#include <istream>
#include <ostream>
#include <sstream>

#include "riskbound/numeric.hpp"

namespace riskbound {

namespace {

std::string cell(const std::optional<double>& v, int precision) {
  return v ? format_sig(*v, precision) : std::string();
}

std::string meta_cell(const BoundResult& r, const char* key, int precision) {
  const auto it = r.meta.find(key);
  return it == r.meta.end() ? std::string() : format_sig(it->second, precision);
}

}  // namespace

void write_bound_csv(std::ostream& os, const BoundResult& r, int precision) {
  os << "flavor,h,s,y,value,numerator,denominator,status\n";
  os << to_string(r.flavor) << ',' << meta_cell(r, "h", precision) << ','
     << meta_cell(r, "s", precision) << ',' << meta_cell(r, "y", precision)
     << ',' << cell(r.value, precision) << ',' << cell(r.numerator, precision)
     << ',' << cell(r.denominator, precision) << ',' << to_string(r.status)
     << '\n';
}

void write_sweep_csv(std::ostream& os, const SweepTable& table,
                     int precision) {
  os << "h,s,flavor,value,numerator,denominator,status\n";
  for (const SweepRow& row : table.rows) {
    os << format_sig(row.h, precision) << ',' << format_sig(row.s, precision)
       << ',' << to_string(row.flavor) << ',' << cell(row.value, precision)
       << ',' << cell(row.numerator, precision) << ','
       << cell(row.denominator, precision) << ',' << to_string(row.status)
       << '\n';
  }
}

void write_matrix_csv(std::ostream& os, const Mat& M, int precision) {
  os << "q,r\n" << M.rows() << ',' << M.cols() << '\n';
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      if (j) os << ',';
      os << format_sig(M(i, j), precision);
    }
    os << '\n';
  }
}

ParsedCsv parse_csv(std::istream& is) {
  ParsedCsv out;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) cells.push_back(tok);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (first) {
      out.header = std::move(cells);
      first = false;
    } else {
      out.rows.push_back(std::move(cells));
    }
  }
  return out;
}

}  // namespace riskbound
