#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "vfest/errors.hpp"
#include "vfest/io.hpp"

using namespace vfest;

namespace {
ReadResult parse(const std::string& text, ReadOptions opt = {}) {
  std::istringstream in(text);
  return read_pairs_csv(in, opt);
}
}  // namespace

TEST(ReadPairs, Basic) {
  const auto r = parse("id,y1,y2\np1,10.21,10.78\n\"p,2\",11.45,13.36\n");
  ASSERT_EQ(r.data.size(), 2u);
  EXPECT_EQ(r.data[1].id, "p,2");
  EXPECT_DOUBLE_EQ(r.data[0].y2, 10.78);
  EXPECT_EQ(r.data.bounds().a, 7.3);
  EXPECT_EQ(r.data.bounds().b, 13.9);
}

TEST(ReadPairs, ColumnOrderAndExtras) {
  const auto r = parse("y2,note,id,y1\r\n2,x,a,1\r\n");
  EXPECT_EQ(r.data[0].id, "a");
  EXPECT_EQ(r.data[0].y1, 1.0);
  EXPECT_EQ(r.data[0].y2, 2.0);
}

TEST(ReadPairs, DropsTies) {
  const auto r = parse("id,y1,y2\na,1,1\nb,1,2\nc,3,3\n");
  EXPECT_EQ(r.dropped_ties, 2u);
  EXPECT_EQ(r.data.size(), 1u);
  ReadOptions keep;
  keep.drop_ties = false;
  EXPECT_EQ(parse("id,y1,y2\na,1,1\n", keep).data.size(), 1u);
  EXPECT_THROW(parse("id,y1,y2\na,1,1\n"), DataError);
}

TEST(ReadPairs, RawTakesLogs) {
  ReadOptions opt;
  opt.raw = true;
  const auto r = parse("id,y1,y2\na,1000,2000\n", opt);
  EXPECT_DOUBLE_EQ(r.data[0].y1, std::log(1000.0));
  EXPECT_THROW(parse("id,y1,y2\na,0,2\n", opt), DataError);
}

TEST(ReadPairs, RowNumberedErrors) {
  auto row_of = [](const std::string& text) -> std::size_t {
    try {
      parse(text);
    } catch (const DataError& e) {
      return e.row();
    }
    return 0;
  };
  EXPECT_EQ(row_of("id,y1,y2\na,1,2\nb,,2\n"), 2u);
  EXPECT_EQ(row_of("id,y1,y2\na,1,2\nb,1,2\nc,1,nan\n"), 3u);
  EXPECT_EQ(row_of("id,y1,y2\na,1,2\nb,1,abc\n"), 2u);
  EXPECT_EQ(row_of("id,y1,y2\na,1\n"), 1u);
  EXPECT_EQ(row_of("id,y1,y2\na,inf,2\n"), 1u);
  EXPECT_THROW(parse(""), DataError);
  EXPECT_THROW(parse("id,y1,y2\n"), DataError);
  EXPECT_THROW(parse("name,a,b\nx,1,2\n"), DataError);
}

TEST(Format, DoubleRoundTrip) {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 12345.678901234567, 5.0}) {
    EXPECT_EQ(parse_double(format_double(x)), x);
  }
  EXPECT_TRUE(std::isnan(parse_double(format_double(NAN))));
  EXPECT_EQ(parse_double(format_double(-INFINITY)), -INFINITY);
  EXPECT_THROW(parse_double("1.5x"), ArgumentError);
}

TEST(Format, CsvEscapeRoundTrip) {
  for (std::string s : {"plain", "a,b", "say \"hi\"", ""}) {
    const auto fields = split_csv_line(csv_escape(s) + "," + csv_escape("x"));
    ASSERT_EQ(fields.size(), 2u);
    EXPECT_EQ(fields[0], s);
  }
  const auto v = parse_double_list("4.84,-0.927");
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[1], -0.927);
}
