#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lowrank_gp/errors.hpp"
#include "lowrank_gp/kernel.hpp"
#include "lowrank_gp/parallel.hpp"
#include "lowrank_gp/rng.hpp"

namespace lowrank_gp {

enum class KnotStrategy { SupportPoints, Grid, RandomSubsample, External };

inline std::string_view to_string(KnotStrategy s) {
  switch (s) {
    case KnotStrategy::SupportPoints: return "sp";
    case KnotStrategy::Grid: return "grid";
    case KnotStrategy::RandomSubsample: return "rand";
    case KnotStrategy::External: return "external";
  }
  return "external";
}

inline KnotStrategy knot_strategy_from_string(std::string_view s) {
  if (s == "sp") return KnotStrategy::SupportPoints;
  if (s == "grid") return KnotStrategy::Grid;
  if (s == "rand") return KnotStrategy::RandomSubsample;
  if (s == "external") return KnotStrategy::External;
  throw DomainError("unknown knot strategy '" + std::string(s) + "' (expected sp, grid, rand, external)");
}

/// Knot locations plus how they were made and, optionally, their energy
/// distance to the data they represent.
struct KnotSet {
  KnotSet(PointSet pts, KnotStrategy how, std::optional<double> energy = std::nullopt)
      : points(std::move(pts)), strategy(how), energy_to_data(energy) {}

  PointSet points;
  KnotStrategy strategy = KnotStrategy::External;
  std::optional<double> energy_to_data;

  // Support-point diagnostics; empty for other strategies.
  bool converged = true;
  int sweeps = 0;
  std::vector<double> energy_trace;

  Eigen::Index k() const noexcept { return points.size(); }
};

namespace detail {

// Sum over i of sum over j of ||a_i - b_j||. Row sums are accumulated in
// parallel and reduced in row order.
inline double pair_distance_sum(const PointSet& a, const PointSet& b, const Parallelism& par) {
  const Eigen::Index d = a.dim();
  const double* pa = a.coords().data();
  const double* pb = b.coords().data();
  const Eigen::Index nb = b.size();
  std::vector<double> rows(static_cast<std::size_t>(a.size()));
  parallel_for(0, rows.size(), par, [&](std::size_t i) {
    const double* x = pa + static_cast<Eigen::Index>(i) * d;
    double s = 0.0;
    for (Eigen::Index j = 0; j < nb; ++j) {
      const double* y = pb + j * d;
      double sq = 0.0;
      for (Eigen::Index t = 0; t < d; ++t) {
        const double diff = x[t] - y[t];
        sq += diff * diff;
      }
      s += std::sqrt(sq);
    }
    rows[i] = s;
  });
  double total = 0.0;
  for (double r : rows) total += r;
  return total;
}

}  // namespace detail

/// Empirical energy distance
///   2/(|a||b|) sum ||a_i - b_j|| - 1/|a|^2 sum ||a_i - a_i'|| - 1/|b|^2 sum ||b_j - b_j'||.
inline double energy_distance(const PointSet& a, const PointSet& b, const Parallelism& par = {}) {
  if (a.empty() || b.empty()) throw DomainError("energy_distance: point sets must be nonempty");
  require_same_dim(a, b, "energy_distance");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double cross = detail::pair_distance_sum(a, b, par);
  const double self_a = detail::pair_distance_sum(a, a, par);
  const double self_b = &a == &b ? self_a : detail::pair_distance_sum(b, b, par);
  return 2.0 * cross / (na * nb) - self_a / (na * na) - self_b / (nb * nb);
}

/// Data side of the energy distance, computed once per data set: the
/// data-data mean distance does not depend on the knots.
class EnergyReference {
 public:
  explicit EnergyReference(PointSet data, const Parallelism& par = {}) : data_(std::move(data)), par_(par) {
    if (data_.empty()) throw DomainError("EnergyReference: data must be nonempty");
    const double n = static_cast<double>(data_.size());
    data_mean_distance_ = detail::pair_distance_sum(data_, data_, par_) / (n * n);
  }

  const PointSet& data() const noexcept { return data_; }
  double data_mean_distance() const noexcept { return data_mean_distance_; }

  double energy_to(const PointSet& knots) const {
    if (knots.empty()) throw DomainError("energy_to: knot set is empty");
    require_same_dim(data_, knots, "energy_to");
    const double n = static_cast<double>(data_.size());
    const double k = static_cast<double>(knots.size());
    const double cross = detail::pair_distance_sum(knots, data_, par_);
    const double self_k = detail::pair_distance_sum(knots, knots, par_);
    return 2.0 * cross / (n * k) - data_mean_distance_ - self_k / (k * k);
  }

 private:
  PointSet data_;
  Parallelism par_;
  double data_mean_distance_ = 0.0;
};

struct SpOptions {
  int max_sweeps = 200;
  double move_tol = 1e-6;            // relative to the data diameter
  double distance_floor = 1e-12;     // closer pairs are treated as coincident
  Eigen::Index max_data = 20000;     // larger inputs are subsampled
  int restarts = 1;
  bool compute_energy = true;        // energy_to_data against the full input
};

namespace detail {

// 2 * max distance to the centroid; isometry invariant.
inline double diameter_proxy(const PointSet& data) {
  const Eigen::RowVectorXd centroid = data.coords().colwise().mean();
  return 2.0 * (data.coords().rowwise() - centroid).rowwise().norm().maxCoeff();
}

inline std::vector<Eigen::Index> sample_without_replacement(Eigen::Index n, Eigen::Index k, std::uint64_t seed) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  CounterRng rng(seed);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto j = i + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

struct SpRun {
  PointSet::Matrix knots;
  double energy = 0.0;
  bool converged = false;
  int sweeps = 0;
  std::vector<double> trace;
};

// One majorization-minimization run (Jacobi sweeps) from a random start.
inline SpRun support_points_run(const PointSet& data, double data_mean_distance, Eigen::Index k,
                                std::uint64_t seed, const SpOptions& opts, const Parallelism& par) {
  const Eigen::Index n = data.size();
  const Eigen::Index d = data.dim();
  const double diameter = diameter_proxy(data);
  const double floor = opts.distance_floor;

  PointSet::Matrix x(k, d);
  if (k <= n) {
    const auto idx = sample_without_replacement(n, k, seed);
    for (Eigen::Index j = 0; j < k; ++j) x.row(j) = data.point(idx[static_cast<std::size_t>(j)]);
  } else {
    // More knots than data: cycle through the data and separate copies.
    CounterRng rng(derive_seed(seed, 1));
    const double spread = 1e-3 * std::max(diameter, 1e-300);
    for (Eigen::Index j = 0; j < k; ++j) {
      x.row(j) = data.point(j % n);
      if (j >= n)
        for (Eigen::Index t = 0; t < d; ++t) x(j, t) += spread * rng.normal();
    }
  }

  const double* py = data.coords().data();
  const double nk_ratio = static_cast<double>(n) / static_cast<double>(k);
  PointSet::Matrix next(k, d);
  std::vector<double> cross_rows(static_cast<std::size_t>(k));
  std::vector<double> self_rows(static_cast<std::size_t>(k));
  std::vector<double> moves(static_cast<std::size_t>(k));

  SpRun run;
  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    const double* px = x.data();
    parallel_for(0, static_cast<std::size_t>(k), par, [&](std::size_t jj) {
      const auto j = static_cast<Eigen::Index>(jj);
      const double* xj = px + j * d;
      double q = 0.0;
      double cross = 0.0;
      double self = 0.0;
      double num_y[8] = {0};
      double num_x[8] = {0};
      std::vector<double> big_y, big_x;
      double* acc_y = num_y;
      double* acc_x = num_x;
      if (d > 8) {
        big_y.assign(static_cast<std::size_t>(d), 0.0);
        big_x.assign(static_cast<std::size_t>(d), 0.0);
        acc_y = big_y.data();
        acc_x = big_x.data();
      }
      for (Eigen::Index m = 0; m < n; ++m) {
        const double* ym = py + m * d;
        double sq = 0.0;
        for (Eigen::Index t = 0; t < d; ++t) {
          const double diff = xj[t] - ym[t];
          sq += diff * diff;
        }
        const double dist = std::sqrt(sq);
        cross += dist;
        if (dist < floor) continue;
        const double w = 1.0 / dist;
        q += w;
        for (Eigen::Index t = 0; t < d; ++t) acc_y[t] += w * ym[t];
      }
      for (Eigen::Index i = 0; i < k; ++i) {
        if (i == j) continue;
        const double* xi = px + i * d;
        double sq = 0.0;
        for (Eigen::Index t = 0; t < d; ++t) {
          const double diff = xj[t] - xi[t];
          sq += diff * diff;
        }
        const double dist = std::sqrt(sq);
        self += dist;
        if (dist < floor) continue;
        const double w = 1.0 / dist;
        for (Eigen::Index t = 0; t < d; ++t) acc_x[t] += w * (xj[t] - xi[t]);
      }
      double move_sq = 0.0;
      if (q == 0.0) {
        next.row(j) = x.row(j);
      }
      for (Eigen::Index t = 0; q > 0.0 && t < d; ++t) {
        const double v = (nk_ratio * acc_x[t] + acc_y[t]) / q;
        const double delta = v - xj[t];
        move_sq += delta * delta;
        next(j, t) = v;
      }
      cross_rows[jj] = cross;
      self_rows[jj] = self;
      moves[jj] = std::sqrt(move_sq);
    });
    double cross = 0.0;
    double self = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      cross += cross_rows[static_cast<std::size_t>(j)];
      self += self_rows[static_cast<std::size_t>(j)];
    }
    const double kd = static_cast<double>(k);
    run.trace.push_back(2.0 * cross / (static_cast<double>(n) * kd) - data_mean_distance - self / (kd * kd));
    x.swap(next);
    run.sweeps = sweep + 1;
    if (*std::max_element(moves.begin(), moves.end()) < opts.move_tol * diameter) {
      run.converged = true;
      break;
    }
  }
  const PointSet final_knots(x);
  const double kd = static_cast<double>(k);
  const double nd = static_cast<double>(n);
  run.energy = 2.0 * pair_distance_sum(final_knots, data, par) / (nd * kd) - data_mean_distance -
               pair_distance_sum(final_knots, final_knots, par) / (kd * kd);
  run.trace.push_back(run.energy);
  run.knots = std::move(x);
  return run;
}

}  // namespace detail

/// Support points: k locations locally minimizing the energy distance to
/// `data` by the convex-concave fixed-point iteration
///   x_j <- [sum_m 1/||x_j - y_m||]^{-1} ((N/k) sum_{i!=j} (x_j - x_i)/||x_j - x_i|| + sum_m y_m/||x_j - y_m||),
/// all knots updated together. Knots are generated, not selected from data.
inline KnotSet support_points(const PointSet& data, Eigen::Index k, std::uint64_t seed, const SpOptions& opts = {},
                              const Parallelism& par = {}) {
  if (data.empty()) throw DomainError("support_points: data must be nonempty");
  if (k < 1) throw DomainError("support_points: k must be >= 1");
  if (k > 10 * data.size()) throw DomainError("support_points: k may not exceed 10 x |data|");
  if (opts.restarts < 1) throw DomainError("support_points: restarts must be >= 1");

  const PointSet working =
      data.size() > opts.max_data
          ? data.select(detail::sample_without_replacement(data.size(), opts.max_data, derive_seed(seed, 0x5b)))
          : data;
  const EnergyReference reference(working, par);

  std::optional<detail::SpRun> best;
  for (int r = 0; r < opts.restarts; ++r) {
    const std::uint64_t run_seed = r == 0 ? seed : derive_seed(seed, static_cast<std::uint64_t>(r));
    auto run = detail::support_points_run(working, reference.data_mean_distance(), k, run_seed, opts, par);
    if (!best || run.energy < best->energy) best = std::move(run);
  }

  KnotSet out(PointSet(std::move(best->knots)), KnotStrategy::SupportPoints);
  out.converged = best->converged;
  out.sweeps = best->sweeps;
  out.energy_trace = std::move(best->trace);
  if (opts.compute_energy) {
    out.energy_to_data =
        working.size() == data.size() ? best->energy : EnergyReference(data, par).energy_to(out.points);
  }
  return out;
}

/// Axis-aligned box [lower, upper].
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static Box unit(Eigen::Index dim) { return {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)}; }

  static Box bounding(const PointSet& pts) {
    if (pts.empty()) throw DomainError("Box::bounding: empty point set");
    return {pts.coords().colwise().minCoeff().transpose(), pts.coords().colwise().maxCoeff().transpose()};
  }
};

/// Regular lattice of cell centers: m^d points with m = k^(1/d); for d = 2
/// this is a sqrt(k) x sqrt(k) grid. The first coordinate varies slowest.
inline KnotSet grid_knots(const Box& box, Eigen::Index k) {
  const Eigen::Index d = box.lower.size();
  if (d < 1 || box.upper.size() != d) throw DomainError("grid_knots: box bounds must share a dimension >= 1");
  if (!((box.upper - box.lower).array() > 0.0).all()) throw DomainError("grid_knots: box is degenerate");
  if (k < 1) throw DomainError("grid_knots: k must be >= 1");
  const auto m = static_cast<Eigen::Index>(std::llround(std::pow(static_cast<double>(k), 1.0 / static_cast<double>(d))));
  Eigen::Index total = 1;
  for (Eigen::Index t = 0; t < d; ++t) total *= m;
  if (total != k) {
    auto power = [d](Eigen::Index b) {
      Eigen::Index p = 1;
      for (Eigen::Index t = 0; t < d; ++t) p *= b;
      return p;
    };
    Eigen::Index lo = std::max<Eigen::Index>(1, m);
    while (power(lo) > k && lo > 1) --lo;
    const Eigen::Index hi = lo + 1;
    const char* what = d == 2 ? "a perfect square" : "a perfect d-th power";
    throw DomainError("grid_knots: k = " + std::to_string(k) + " is not " + what + "; nearest are " +
                      std::to_string(power(lo)) + " and " + std::to_string(power(hi)));
  }
  PointSet::Matrix pts(k, d);
  const Eigen::VectorXd step = (box.upper - box.lower) / static_cast<double>(m);
  for (Eigen::Index r = 0; r < k; ++r) {
    Eigen::Index rem = r;
    for (Eigen::Index t = d - 1; t >= 0; --t) {
      const Eigen::Index idx = rem % m;
      rem /= m;
      pts(r, t) = box.lower(t) + (static_cast<double>(idx) + 0.5) * step(t);
    }
  }
  return {PointSet(std::move(pts)), KnotStrategy::Grid, std::nullopt};
}

/// Uniform sample of k data locations without replacement.
inline KnotSet random_knots(const PointSet& data, Eigen::Index k, std::uint64_t seed, const Parallelism& par = {}) {
  if (k < 1 || k > data.size()) {
    throw DomainError("random_knots: k = " + std::to_string(k) + " must lie in [1, " + std::to_string(data.size()) +
                      "]");
  }
  KnotSet out{data.select(detail::sample_without_replacement(data.size(), k, seed)), KnotStrategy::RandomSubsample,
              std::nullopt};
  out.energy_to_data = energy_distance(out.points, data, par);
  return out;
}

}  // namespace lowrank_gp
