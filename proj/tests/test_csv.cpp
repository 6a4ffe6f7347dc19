#include <gtest/gtest.h>

#include <charconv>
#include <sstream>

#include "lowrank_gp/complexity.hpp"
#include "lowrank_gp/csv.hpp"

using namespace lowrank_gp;

namespace {

csv::Table parse(const std::string& text) {
  std::istringstream in(text);
  return csv::read_table(in);
}

std::size_t error_line(const std::string& text) {
  try {
    (void)parse(text);
  } catch (const IngestError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST(Ingest, ThreeRowDataset) {
  const csv::Table t = parse("x1,x2,y\n0,0,1\n1,1,2\n0.5,0.5,3\n");
  const Dataset d = t.dataset();
  EXPECT_EQ(d.size(), 3);
  EXPECT_EQ(d.locations().dim(), 2);
  EXPECT_EQ(d.values()(2), 3.0);
  EXPECT_EQ(d.locations().point(2)(0), 0.5);
}

TEST(Ingest, LocationsOnly) {
  const csv::Table t = parse("x1,x2\n0.1,0.2\n0.3,0.4\n");
  EXPECT_FALSE(t.values.has_value());
  EXPECT_EQ(t.locations.size(), 2);
  EXPECT_THROW(t.dataset(), IngestError);
}

TEST(Ingest, NanValueNamesLine) {
  const std::string text = "x1,x2,y\n0,0,NaN\n1,1,2\n";
  EXPECT_EQ(error_line(text), 2u);
  try {
    (void)parse(text);
  } catch (const IngestError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Ingest, MissingField) { EXPECT_EQ(error_line("x1,x2,y\n0,0,1\n1,,2\n"), 3u); }

TEST(Ingest, InconsistentColumnCount) { EXPECT_EQ(error_line("x1,x2,y\n0,0,1\n1,2\n"), 3u); }

TEST(Ingest, PhysicalLineNumbersCountCommentsAndBlanks) {
  EXPECT_EQ(error_line("# generated\nx1,y\n\n0.5,1\n# note\n0.7,inf\n"), 6u);
}

TEST(Ingest, BadHeader) {
  EXPECT_EQ(error_line("lon,lat,y\n0,0,1\n"), 1u);
  EXPECT_EQ(error_line("x2,x1,y\n0,0,1\n"), 1u);
  EXPECT_EQ(error_line("y\n1\n"), 1u);
  EXPECT_THROW(parse("# only comments\n"), IngestError);
}

TEST(Ingest, DuplicatesCountedAndKept) {
  const csv::Table t = parse("x1,x2,y\n0,0,1\n0,0,2\n1,0,3\n0,0,4\n");
  EXPECT_EQ(t.locations.size(), 4);
  EXPECT_EQ(t.duplicate_locations, 2u);
}

TEST(Ingest, WhitespaceAndCrlfTolerated) {
  const csv::Table t = parse("x1, x2 ,y\r\n 0.25 ,1e-3, -2\r\n");
  EXPECT_EQ(t.locations.point(0)(1), 1e-3);
  EXPECT_EQ((*t.values)(0), -2.0);
}

TEST(Csv, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 2.8968, 1e-300, -123456.789, 6.02214076e23}) {
    const std::string s = csv::format_double(v);
    double back = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    EXPECT_EQ(back, v) << s;
  }
  EXPECT_EQ(csv::format_double(0.5), "0.5");
}

TEST(Csv, Rfc4180Quoting) {
  EXPECT_EQ(csv::quote("plain"), "plain");
  EXPECT_EQ(csv::quote("a,b"), "\"a,b\"");
  EXPECT_EQ(csv::quote("say \"hi\""), "\"say \"\"hi\"\"\"");
}

TEST(Csv, DatasetRoundTrip) {
  const Dataset d(uniform_points(20, 3, 4), Eigen::VectorXd::LinSpaced(20, -1.0, 1.0), DataKind::Observed);
  std::stringstream ss;
  csv::write_dataset(ss, d);
  const Dataset back = csv::read_table(ss).dataset();
  EXPECT_TRUE((back.locations().coords().array() == d.locations().coords().array()).all());
  EXPECT_TRUE((back.values().array() == d.values().array()).all());
}

TEST(Csv, KnotFileRoundTrip) {
  const KnotSet ks = grid_knots(Box::unit(2), 9);
  std::stringstream ss;
  csv::write_knots(ss, ks, 42);
  std::string first;
  std::getline(ss, first);
  EXPECT_EQ(first, "# strategy=grid k=9 seed=42");
  ss.seekg(0);
  const KnotSet back = csv::read_knots(ss);
  EXPECT_EQ(back.k(), 9);
  EXPECT_EQ(back.strategy, KnotStrategy::Grid);
  EXPECT_TRUE((back.points.coords().array() == ks.points.coords().array()).all());
}

TEST(Csv, KnotFileRejectsValues) {
  std::istringstream in("x1,y\n0.5,1\n");
  EXPECT_THROW(csv::read_knots(in), IngestError);
}
