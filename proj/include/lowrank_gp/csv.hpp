#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lowrank_gp/errors.hpp"
#include "lowrank_gp/gpcore.hpp"
#include "lowrank_gp/kernel.hpp"
#include "lowrank_gp/knots.hpp"

namespace lowrank_gp::csv {

/// Shortest round-trip-safe rendering: 17 significant digits.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// RFC-4180 field quoting.
inline std::string quote(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

/// Row writer: fields separated by commas, CRLF-free '\n' line endings.
class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}

  Writer& field(std::string_view s) {
    sep();
    os_ << quote(s);
    return *this;
  }
  Writer& field(double v) {
    sep();
    os_ << format_double(v);
    return *this;
  }
  Writer& field(long long v) {
    sep();
    os_ << v;
    return *this;
  }
  Writer& field(unsigned long long v) {
    sep();
    os_ << v;
    return *this;
  }
  Writer& field(int v) { return field(static_cast<long long>(v)); }
  Writer& field(long v) { return field(static_cast<long long>(v)); }
  Writer& field(unsigned long v) { return field(static_cast<unsigned long long>(v)); }
  void end_row() {
    os_ << '\n';
    first_ = true;
  }

  void header(std::initializer_list<std::string_view> names) {
    for (auto n : names) field(n);
    end_row();
  }

 private:
  void sep() {
    if (!first_) os_ << ',';
    first_ = false;
  }
  std::ostream& os_;
  bool first_ = true;
};

/// Result of reading a `x1,...,xd[,y]` file.
struct Table {
  PointSet locations;
  std::optional<Eigen::VectorXd> values;
  std::vector<std::string> comments;  // '#' lines, without the leading '#'
  std::size_t duplicate_locations = 0;

  Dataset dataset(DataKind kind = DataKind::Observed) const {
    if (!values) throw IngestError("file has no y column", 0);
    return {locations, *values, kind};
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

/// Parses a location table. The header must be `x1,...,xd` or `x1,...,xd,y`.
/// Lines starting with '#' and blank lines are skipped. Errors carry the
/// 1-based physical line number.
inline Table read_table(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> comments;
  std::optional<std::size_t> dim;
  bool has_y = false;
  std::vector<double> coords;
  std::vector<double> ys;
  std::size_t header_line = 0;

  while (std::getline(in, line)) {
    ++line_no;
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      comments.emplace_back(detail::trim(t.substr(1)));
      continue;
    }
    const auto fields = detail::split(t);
    if (!dim) {
      header_line = line_no;
      std::size_t d = fields.size();
      if (!fields.empty() && fields.back() == "y") {
        has_y = true;
        --d;
      }
      if (d == 0) throw IngestError("header must name at least one coordinate column x1", line_no);
      for (std::size_t c = 0; c < d; ++c) {
        if (fields[c] != "x" + std::to_string(c + 1)) {
          throw IngestError("header column " + std::to_string(c + 1) + " is '" + std::string(fields[c]) +
                                "', expected 'x" + std::to_string(c + 1) + "'",
                            line_no);
        }
      }
      dim = d;
      continue;
    }
    const std::size_t expected = *dim + (has_y ? 1 : 0);
    if (fields.size() != expected) {
      throw IngestError("expected " + std::to_string(expected) + " columns, found " + std::to_string(fields.size()),
                        line_no);
    }
    for (std::size_t c = 0; c < expected; ++c) {
      const auto f = fields[c];
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || ec != std::errc{} || ptr != f.data() + f.size() || !std::isfinite(v)) {
        const std::string col = c < *dim ? "x" + std::to_string(c + 1) : "y";
        throw IngestError("missing or non-finite value '" + std::string(f) + "' in column " + col, line_no);
      }
      (c < *dim ? coords : ys).push_back(v);
    }
  }
  if (!dim) throw IngestError("no header row found", line_no);
  (void)header_line;

  const auto n = static_cast<Eigen::Index>(coords.size() / *dim);
  PointSet::Matrix m(n, static_cast<Eigen::Index>(*dim));
  std::copy(coords.begin(), coords.end(), m.data());
  Table table{PointSet(std::move(m)), std::nullopt, std::move(comments), 0};
  if (has_y) table.values = Eigen::Map<const Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));

  std::map<std::vector<double>, int> seen;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = table.locations.point(i);
    if (seen[std::vector<double>(row.begin(), row.end())]++ > 0) ++table.duplicate_locations;
  }
  return table;
}

inline Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open '" + path + "'", 0);
  return read_table(in);
}

/// Dataset or location-only ingestion from a CSV path.
inline Table ingest_csv(const std::string& path) { return read_table(path); }

inline void write_points(std::ostream& os, const PointSet& pts, const Eigen::VectorXd* values = nullptr) {
  Writer w(os);
  for (Eigen::Index c = 0; c < pts.dim(); ++c) w.field("x" + std::to_string(c + 1));
  if (values) w.field("y");
  w.end_row();
  for (Eigen::Index i = 0; i < pts.size(); ++i) {
    for (Eigen::Index c = 0; c < pts.dim(); ++c) w.field(pts.point(i)(c));
    if (values) w.field((*values)(i));
    w.end_row();
  }
}

inline void write_dataset(std::ostream& os, const Dataset& data) { write_points(os, data.locations(), &data.values()); }

/// Knot file: `# strategy=<name> k=<k> seed=<seed>` then `x1..xd` rows.
inline void write_knots(std::ostream& os, const KnotSet& knots, std::uint64_t seed) {
  os << "# strategy=" << to_string(knots.strategy) << " k=" << knots.k() << " seed=" << seed << '\n';
  write_points(os, knots.points);
}

inline KnotSet read_knots(std::istream& in) {
  Table t = read_table(in);
  if (t.values) throw IngestError("knot files carry coordinates only (no y column)", 0);
  KnotSet out{std::move(t.locations), KnotStrategy::External, std::nullopt};
  for (const auto& c : t.comments) {
    std::istringstream ss(c);
    std::string tok;
    while (ss >> tok) {
      if (tok.rfind("strategy=", 0) == 0) out.strategy = knot_strategy_from_string(tok.substr(9));
    }
  }
  if (out.k() < 1) throw IngestError("knot file has no rows", 0);
  return out;
}

inline KnotSet read_knots(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open '" + path + "'", 0);
  return read_knots(in);
}

}  // namespace lowrank_gp::csv
