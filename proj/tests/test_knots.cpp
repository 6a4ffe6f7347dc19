#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <vector>

#include "lowrank_gp/complexity.hpp"
#include "lowrank_gp/knots.hpp"

using namespace lowrank_gp;

namespace {

PointSet from_matrix(std::initializer_list<std::initializer_list<double>> rows) {
  PointSet::Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return PointSet(std::move(m));
}

std::vector<std::vector<double>> sorted_rows(const PointSet& p) {
  std::vector<std::vector<double>> out;
  for (Eigen::Index i = 0; i < p.size(); ++i) out.emplace_back(p.point(i).begin(), p.point(i).end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST(EnergyDistance, IdenticalSetsGiveZero) {
  const PointSet a = uniform_points(300, 2, 1);
  EXPECT_LT(std::abs(energy_distance(a, a)), 1e-12);
  std::vector<Eigen::Index> rev(300);
  for (Eigen::Index i = 0; i < 300; ++i) rev[static_cast<std::size_t>(i)] = 299 - i;
  EXPECT_LT(std::abs(energy_distance(a, a.select(rev))), 1e-12);
}

TEST(EnergyDistance, TwoPointsInOneDimension) {
  EXPECT_DOUBLE_EQ(energy_distance(from_matrix({{0.0}}), from_matrix({{1.0}})), 2.0);
}

TEST(EnergyDistance, SymmetricAndNonnegative) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const PointSet a = uniform_points(40 + static_cast<Eigen::Index>(s), 2, s);
    const PointSet b = uniform_points(25, 2, 100 + s);
    const double ab = energy_distance(a, b);
    EXPECT_NEAR(ab, energy_distance(b, a), 1e-14);
    EXPECT_GE(ab, -1e-12);
  }
}

TEST(EnergyDistance, Errors) {
  EXPECT_THROW(energy_distance(uniform_points(3, 2, 1), uniform_points(3, 3, 1)), DomainError);
  EXPECT_THROW(energy_distance(PointSet::empty(2), uniform_points(3, 2, 1)), DomainError);
}

TEST(EnergyDistance, CachedReferenceAgreesWithDirect) {
  const PointSet data = uniform_points(500, 2, 3);
  const EnergyReference ref(data);
  PointSet::Matrix k = uniform_points(20, 2, 4).coords();
  EXPECT_NEAR(ref.energy_to(PointSet(k)), energy_distance(data, PointSet(k)), 1e-13);
  // Move one knot onto a data point and recompute both ways.
  k.row(7) = data.point(123);
  EXPECT_NEAR(ref.energy_to(PointSet(k)), energy_distance(data, PointSet(k)), 1e-13);
}

TEST(EnergyDistance, ThreadCountInvariant) {
  const PointSet a = uniform_points(700, 2, 5);
  const PointSet b = uniform_points(90, 2, 6);
  EXPECT_EQ(energy_distance(a, b, Parallelism{1}), energy_distance(a, b, Parallelism{3}));
}

TEST(SupportPoints, RepeatedPointCollapses) {
  PointSet::Matrix m(50, 2);
  m.rowwise() = Eigen::RowVector2d(0.3, 0.7);
  const KnotSet ks = support_points(PointSet(m), 5, 1);
  ASSERT_EQ(ks.k(), 5);
  for (Eigen::Index j = 0; j < 5; ++j) EXPECT_NEAR((ks.points.point(j) - Eigen::RowVector2d(0.3, 0.7)).norm(), 0.0, 1e-9);
  ASSERT_TRUE(ks.energy_to_data.has_value());
  EXPECT_NEAR(*ks.energy_to_data, 0.0, 1e-9);
}

TEST(SupportPoints, EnergyTraceDescends) {
  const PointSet data = uniform_points(2000, 2, 7);
  const KnotSet ks = support_points(data, 100, 8);
  ASSERT_GE(ks.energy_trace.size(), 2u);
  for (std::size_t i = 1; i < ks.energy_trace.size(); ++i) {
    EXPECT_LE(ks.energy_trace[i], ks.energy_trace[i - 1] + 1e-15) << "sweep " << i;
  }
  EXPECT_LT(*ks.energy_to_data, ks.energy_trace.front());
  EXPECT_NEAR(*ks.energy_to_data, energy_distance(data, ks.points), 1e-12);
  EXPECT_NEAR(*ks.energy_to_data, ks.energy_trace.back(), 1e-15);
}

TEST(SupportPoints, MovesAwayFromDataStart) {
  const PointSet data = uniform_points(500, 2, 21);
  const KnotSet sp = support_points(data, 36, 2);
  EXPECT_GT(sp.sweeps, 10);
  EXPECT_LT(*sp.energy_to_data, 0.25 * *random_knots(data, 36, 2).energy_to_data);
}

TEST(SupportPoints, GeneratedNotSelected) {
  const PointSet data = uniform_points(500, 2, 9);
  const KnotSet ks = support_points(data, 20, 10);
  const auto rows = sorted_rows(data);
  int hits = 0;
  for (Eigen::Index j = 0; j < ks.k(); ++j) {
    const std::vector<double> r(ks.points.point(j).begin(), ks.points.point(j).end());
    if (std::binary_search(rows.begin(), rows.end(), r)) ++hits;
  }
  EXPECT_LT(hits, 20);
  EXPECT_EQ(ks.strategy, KnotStrategy::SupportPoints);
}

TEST(SupportPoints, DeterministicGivenSeed) {
  const PointSet data = uniform_points(400, 2, 11);
  const KnotSet a = support_points(data, 16, 3);
  const KnotSet b = support_points(data, 16, 3);
  EXPECT_TRUE((a.points.coords().array() == b.points.coords().array()).all());
  const KnotSet c = support_points(data, 16, 3, {}, Parallelism{4});
  EXPECT_TRUE((a.points.coords().array() == c.points.coords().array()).all());
}

TEST(SupportPoints, IsometryEquivariant) {
  const PointSet data = uniform_points(800, 2, 12);
  const double th = 0.61;
  Eigen::Matrix2d rot;
  rot << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  const Eigen::RowVector2d shift(3.5, -1.25);
  const PointSet moved(PointSet::Matrix((data.coords() * rot.transpose()).rowwise() + shift));
  const KnotSet a = support_points(data, 30, 5);
  const KnotSet b = support_points(moved, 30, 5);
  const PointSet::Matrix expected = (a.points.coords() * rot.transpose()).rowwise() + shift;
  EXPECT_LT((b.points.coords() - expected).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(SupportPoints, RestartsNeverWorse) {
  const PointSet data = uniform_points(600, 2, 13);
  SpOptions one;
  SpOptions three;
  three.restarts = 3;
  EXPECT_LE(*support_points(data, 25, 4, three).energy_to_data, *support_points(data, 25, 4, one).energy_to_data);
}

TEST(SupportPoints, SubsamplesLargeInputs) {
  const PointSet data = uniform_points(3000, 2, 14);
  SpOptions o;
  o.max_data = 1000;
  const KnotSet ks = support_points(data, 20, 4, o);
  EXPECT_NEAR(*ks.energy_to_data, energy_distance(data, ks.points), 1e-12);
}

TEST(SupportPoints, MoreKnotsThanData) {
  const PointSet data = uniform_points(10, 2, 15);
  const KnotSet ks = support_points(data, 25, 1);
  EXPECT_EQ(ks.k(), 25);
  EXPECT_TRUE(ks.points.coords().allFinite());
}

TEST(SupportPoints, Errors) {
  const PointSet data = uniform_points(10, 2, 1);
  EXPECT_THROW(support_points(data, 0, 1), DomainError);
  EXPECT_THROW(support_points(data, 101, 1), DomainError);
  EXPECT_THROW(support_points(PointSet::empty(2), 3, 1), DomainError);
}

TEST(GridKnots, FourCellCenters) {
  const KnotSet g = grid_knots(Box::unit(2), 4);
  const auto rows = sorted_rows(g.points);
  const std::vector<std::vector<double>> expected = {{0.25, 0.25}, {0.25, 0.75}, {0.75, 0.25}, {0.75, 0.75}};
  EXPECT_EQ(rows, expected);
  EXPECT_EQ(g.strategy, KnotStrategy::Grid);
}

TEST(GridKnots, SingleKnotIsCentroid) {
  Box b{Eigen::Vector2d(-1.0, 2.0), Eigen::Vector2d(3.0, 4.0)};
  const KnotSet g = grid_knots(b, 1);
  EXPECT_DOUBLE_EQ(g.points.point(0)(0), 1.0);
  EXPECT_DOUBLE_EQ(g.points.point(0)(1), 3.0);
}

TEST(GridKnots, ThirtySixPointsGap) {
  const KnotSet g = grid_knots(Box::unit(2), 36);
  ASSERT_EQ(g.k(), 36);
  double min_gap = INFINITY;
  for (Eigen::Index i = 0; i < 36; ++i)
    for (Eigen::Index j = i + 1; j < 36; ++j) min_gap = std::min(min_gap, (g.points.point(i) - g.points.point(j)).norm());
  EXPECT_NEAR(min_gap, 1.0 / 6.0, 1e-12);
}

TEST(GridKnots, NonSquareNamesNearestSquares) {
  try {
    (void)grid_knots(Box::unit(2), 30);
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("25"), std::string::npos) << msg;
    EXPECT_NE(msg.find("36"), std::string::npos) << msg;
  }
}

TEST(GridKnots, DegenerateBoxRejected) {
  EXPECT_THROW(grid_knots(Box{Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0)}, 4), DomainError);
}

TEST(RandomKnots, FullSizeIsPermutation) {
  const PointSet data = uniform_points(50, 2, 16);
  const KnotSet ks = random_knots(data, 50, 3);
  EXPECT_EQ(sorted_rows(ks.points), sorted_rows(data));
  EXPECT_NEAR(*ks.energy_to_data, 0.0, 1e-12);
}

TEST(RandomKnots, SingleElementFromData) {
  const PointSet data = uniform_points(50, 2, 17);
  const KnotSet ks = random_knots(data, 1, 8);
  const auto rows = sorted_rows(data);
  const std::vector<double> r(ks.points.point(0).begin(), ks.points.point(0).end());
  EXPECT_TRUE(std::binary_search(rows.begin(), rows.end(), r));
  EXPECT_TRUE((random_knots(data, 1, 8).points.coords().array() == ks.points.coords().array()).all());
}

TEST(RandomKnots, Errors) {
  const PointSet data = uniform_points(5, 2, 1);
  EXPECT_THROW(random_knots(data, 6, 1), DomainError);
  EXPECT_THROW(random_knots(data, 0, 1), DomainError);
}

TEST(KnotStrategy, StringRoundTrip) {
  for (auto s : {KnotStrategy::SupportPoints, KnotStrategy::Grid, KnotStrategy::RandomSubsample,
                 KnotStrategy::External})
    EXPECT_EQ(knot_strategy_from_string(to_string(s)), s);
  EXPECT_THROW(knot_strategy_from_string("hexagon"), DomainError);
}
