#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "partx/core.hpp"
#include "partx/errors.hpp"
#include "partx/partition.hpp"
#include "partx/sampling.hpp"

namespace partx::app {

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

/// Strict parse of a whole field; leading/trailing blanks are allowed.
inline bool parse_double(std::string_view s, double& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n'))
    s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::string leaf_csv_header(std::size_t dim) {
  std::string h;
  for (std::size_t i = 0; i < dim; ++i) h += "lower_" + std::to_string(i) + ",";
  for (std::size_t i = 0; i < dim; ++i) h += "upper_" + std::to_string(i) + ",";
  return h + "label,level,birth_iteration,sample_count,q_min_mean,q_max_mean";
}

inline std::string samples_csv_header(std::size_t dim) {
  std::string h;
  for (std::size_t i = 0; i < dim; ++i) h += "x_" + std::to_string(i) + ",";
  return h + "value";
}

/// One leaf per row, in leaf-id order. Quantile columns are empty for leaves
/// that were never fitted.
inline void write_leaves_csv(std::ostream& os, const PartitionTree& tree) {
  os << leaf_csv_header(tree.root().dim()) << '\n';
  for (const auto& r : leaf_records(tree)) {
    for (double v : r.lower) os << format_double(v) << ',';
    for (double v : r.upper) os << format_double(v) << ',';
    os << to_string(r.label) << ',' << r.level << ',' << r.birth_iteration << ',' << r.sample_count << ',';
    if (r.q_min_mean) os << format_double(*r.q_min_mean);
    os << ',';
    if (r.q_max_mean) os << format_double(*r.q_max_mean);
    os << '\n';
  }
}

inline void write_samples_csv(std::ostream& os, const SampleBatch& s, std::size_t dim) {
  os << samples_csv_header(dim) << '\n';
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (Eigen::Index j = 0; j < s.points[i].size(); ++j) os << format_double(s.points[i][j]) << ',';
    os << format_double(s.values[i]) << '\n';
  }
}

/// Reads `x_0..x_{d-1},value` rows. A first line that does not parse as numbers
/// is taken as a header. Row indices in errors count data rows from 0.
inline SampleBatch read_samples_csv(std::istream& is, std::size_t dim) {
  SampleBatch out;
  std::string line;
  bool first = true;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") {
      first = false;
      continue;
    }
    const auto fields = split_csv_line(line);
    std::vector<double> nums(fields.size());
    bool ok = fields.size() == dim + 1;
    for (std::size_t i = 0; ok && i < fields.size(); ++i) ok = parse_double(fields[i], nums[i]);
    if (!ok) {
      if (first) {
        first = false;
        continue;
      }
      throw MalformedRow("samples row " + std::to_string(row) + ": expected " + std::to_string(dim + 1) +
                             " numeric fields",
                         row);
    }
    first = false;
    Point x(static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < dim; ++i) x[static_cast<Eigen::Index>(i)] = nums[i];
    out.add(std::move(x), nums[dim]);
    ++row;
  }
  return out;
}

}  // namespace partx::app
