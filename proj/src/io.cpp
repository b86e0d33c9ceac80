#include "vfest/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>

#include "vfest/errors.hpp"

namespace vfest {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

bool try_parse(std::string_view text, double& out) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return false;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

}  // namespace

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

double parse_double(std::string_view text) {
  const std::string_view t = trim(text);
  if (t == "nan") return std::nan("");
  if (t == "inf") return INFINITY;
  if (t == "-inf") return -INFINITY;
  double x = 0.0;
  if (!try_parse(t, x)) throw ArgumentError("not a number: '" + std::string(text) + "'");
  return x;
}

std::vector<double> parse_double_list(std::string_view text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto piece = text.substr(start, comma == std::string_view::npos ? comma : comma - start);
    out.push_back(parse_double(piece));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

ReadResult read_pairs_csv(std::istream& in, const ReadOptions& options) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty input: expected header id,y1,y2");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_csv_line(line);
  int col_id = -1, col_y1 = -1, col_y2 = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const auto name = trim(header[i]);
    if (name == "id") col_id = static_cast<int>(i);
    if (name == "y1") col_y1 = static_cast<int>(i);
    if (name == "y2") col_y2 = static_cast<int>(i);
  }
  if (col_id < 0 || col_y1 < 0 || col_y2 < 0) {
    throw DataError("header must contain id,y1,y2");
  }
  const auto needed = static_cast<std::size_t>(std::max({col_id, col_y1, col_y2})) + 1;

  ReadResult result;
  std::vector<PairedObservation> pairs;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto f = split_csv_line(line);
    if (f.size() < needed) throw DataError("expected at least " + std::to_string(needed) + " fields", row);
    PairedObservation p;
    p.id = std::string(trim(f[col_id]));
    double v[2];
    const int cols[2] = {col_y1, col_y2};
    for (int k = 0; k < 2; ++k) {
      const auto& text = f[cols[k]];
      const char* name = k == 0 ? "y1" : "y2";
      if (trim(text).empty()) throw DataError(std::string("missing ") + name, row);
      if (!try_parse(text, v[k])) {
        throw DataError(std::string(name) + " is not a number: '" + text + "'", row);
      }
      if (options.raw) {
        if (!(v[k] > 0.0)) throw DataError(std::string(name) + " must be positive with --raw", row);
        v[k] = std::log(v[k]);
      }
      if (!std::isfinite(v[k])) throw DataError(std::string(name) + " is not finite", row);
    }
    p.y1 = v[0];
    p.y2 = v[1];
    if (options.drop_ties && p.y1 == p.y2) {
      ++result.dropped_ties;
      continue;
    }
    pairs.push_back(std::move(p));
  }
  result.rows_read = row;
  if (pairs.empty()) {
    throw DataError(row == 0 ? "no data rows" : "no usable pairs after dropping ties");
  }
  result.data = PairedDataset(std::move(pairs), options.bounds);
  return result;
}

ReadResult read_pairs_csv(const std::string& path, const ReadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_pairs_csv(in, options);
}

}  // namespace vfest
