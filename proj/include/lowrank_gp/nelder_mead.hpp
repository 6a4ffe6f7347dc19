#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace lowrank_gp {

struct NelderMeadOptions {
  double diameter_tol = 1e-6;  // stop when max_i ||v_i - v_best|| < tol
  int max_iter = 500;
  double initial_step = 0.5;   // simplex edge along each axis
};

struct NelderMeadResult {
  Eigen::VectorXd argmin;
  double value = std::numeric_limits<double>::infinity();
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::vector<double> best_trace;  // best value after each iteration (non-increasing)
};

/// Derivative-free minimization with the standard reflection/expansion/
/// contraction/shrink coefficients (1, 2, 1/2, 1/2). Non-finite objective
/// values are treated as +inf.
template <typename Objective>
NelderMeadResult nelder_mead(Objective&& f, const Eigen::VectorXd& start, const NelderMeadOptions& opts = {}) {
  const Eigen::Index dim = start.size();
  NelderMeadResult res;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++res.evaluations;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  if (dim == 0) {
    res.argmin = start;
    res.value = eval(start);
    res.converged = true;
    return res;
  }

  std::vector<Eigen::VectorXd> simplex(dim + 1, start);
  std::vector<double> values(dim + 1);
  for (Eigen::Index i = 0; i < dim; ++i) simplex[i + 1](i) += opts.initial_step;
  for (Eigen::Index i = 0; i <= dim; ++i) values[i] = eval(simplex[i]);

  std::vector<Eigen::Index> order(dim + 1);
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
    std::vector<Eigen::VectorXd> s2;
    std::vector<double> v2;
    for (auto i : order) {
      s2.push_back(simplex[i]);
      v2.push_back(values[i]);
    }
    simplex = std::move(s2);
    values = std::move(v2);
  };
  auto diameter = [&] {
    double d = 0.0;
    for (Eigen::Index i = 1; i <= dim; ++i) d = std::max(d, (simplex[i] - simplex[0]).norm());
    return d;
  };

  sort_simplex();
  while (res.iterations < opts.max_iter) {
    if (diameter() < opts.diameter_tol) {
      res.converged = true;
      break;
    }
    ++res.iterations;
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (Eigen::Index i = 0; i < dim; ++i) centroid += simplex[i];
    centroid /= static_cast<double>(dim);

    const Eigen::VectorXd& worst = simplex[dim];
    const Eigen::VectorXd reflected = centroid + (centroid - worst);
    const double f_r = eval(reflected);
    if (f_r < values[0]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - worst);
      const double f_e = eval(expanded);
      if (f_e < f_r) {
        simplex[dim] = expanded;
        values[dim] = f_e;
      } else {
        simplex[dim] = reflected;
        values[dim] = f_r;
      }
    } else if (f_r < values[dim - 1]) {
      simplex[dim] = reflected;
      values[dim] = f_r;
    } else {
      const bool outside = f_r < values[dim];
      const Eigen::VectorXd contracted =
          outside ? Eigen::VectorXd(centroid + 0.5 * (reflected - centroid))
                  : Eigen::VectorXd(centroid + 0.5 * (worst - centroid));
      const double f_c = eval(contracted);
      if (f_c < (outside ? f_r : values[dim])) {
        simplex[dim] = contracted;
        values[dim] = f_c;
      } else {
        for (Eigen::Index i = 1; i <= dim; ++i) {
          simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0]);
          values[i] = eval(simplex[i]);
        }
      }
    }
    sort_simplex();
    res.best_trace.push_back(values[0]);
  }
  if (!res.converged && diameter() < opts.diameter_tol) res.converged = true;
  res.argmin = simplex[0];
  res.value = values[0];
  return res;
}

}  // namespace lowrank_gp
