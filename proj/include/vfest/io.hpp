#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "vfest/model.hpp"

namespace vfest {

struct ReadOptions {
  bool raw = false;        // apply natural log to y1, y2
  bool drop_ties = true;   // pairs with y1 == y2 exactly
  Bounds bounds{};
};

struct ReadResult {
  PairedDataset data;
  std::size_t dropped_ties = 0;
  std::size_t rows_read = 0;
};

// CSV with header id,y1,y2 (extra columns ignored). Row numbers in errors are
// 1-based over data rows. An input with no usable pairs is a DataError.
ReadResult read_pairs_csv(std::istream& in, const ReadOptions& options = {});
ReadResult read_pairs_csv(const std::string& path, const ReadOptions& options = {});

// One CSV row split into fields; double quotes are honoured.
std::vector<std::string> split_csv_line(std::string_view line);
std::string csv_escape(std::string_view field);

// Shortest text that parses back to the same double.
std::string format_double(double x);
double parse_double(std::string_view text);

// "a,b,c" -> {a, b, c}
std::vector<double> parse_double_list(std::string_view text);

}  // namespace vfest
