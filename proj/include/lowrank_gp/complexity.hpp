#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lowrank_gp/csv.hpp"
#include "lowrank_gp/errors.hpp"
#include "lowrank_gp/kernel.hpp"
#include "lowrank_gp/parallel.hpp"
#include "lowrank_gp/rng.hpp"

namespace lowrank_gp {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Ordinary least squares y = intercept + slope * x.
inline LineFit ols(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("ols: need >= 2 paired observations");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 1e-300)) throw DomainError("ols: predictor has no variance");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

/// Regression of log(mspe) on log(n). Requires >= 3 pairs, >= 2 distinct n,
/// positive mspe.
inline LineFit fit_rate_line(std::span<const std::pair<double, double>> pairs) {
  if (pairs.size() < 3) throw DomainError("fit_rate_line: need at least 3 (n, mspe) pairs");
  std::vector<double> lx, ly;
  for (const auto& [n, mspe] : pairs) {
    if (!(n > 0.0) || !(mspe > 0.0)) throw DomainError("fit_rate_line: n and mspe must be positive");
    lx.push_back(std::log(n));
    ly.push_back(std::log(mspe));
  }
  return ols(lx, ly);
}

enum class SmoothnessRegime { True, Undersmoothed, Oversmoothed };

/// Converts a negative slope NS of log MSPE vs log n to a complexity
/// estimate: 1/(1 - NS) for the true and undersmoothed cases,
/// (gamma_true - 1)/(1 - NS) for the oversmoothed case.
inline double slope_to_gamma(double ns, SmoothnessRegime regime, std::optional<double> gamma_true = std::nullopt) {
  if (!(ns > 0.0 && ns < 1.0)) {
    throw DomainError("slope_to_gamma: negative slope " + std::to_string(ns) + " is outside (0, 1)");
  }
  if (regime == SmoothnessRegime::Oversmoothed) {
    if (!gamma_true) throw DomainError("slope_to_gamma: the oversmoothed regime needs gamma_true");
    return (*gamma_true - 1.0) / (1.0 - ns);
  }
  return 1.0 / (1.0 - ns);
}

struct GammaEstimate {
  double gamma = 0.0;
  Eigen::Index n0 = 0;
  std::uint64_t seed = 0;
  Eigen::Index fit_lo = 1;  // 1-based inclusive eigenvalue index range
  Eigen::Index fit_hi = 1;
  double r2 = 0.0;
};

/// Relative cutoff below which eigenvalues are treated as numerical noise.
inline constexpr double kEigenTruncation = 1e-9;

/// Complexity estimate from the eigenvalue decay of one covariance matrix:
/// the slope of -log(lambda_i) against log(i) over the retained spectrum.
inline GammaEstimate gamma_from_eigenvalues(Eigen::VectorXd eigenvalues, std::uint64_t seed = 0) {
  std::sort(eigenvalues.begin(), eigenvalues.end(), std::greater<>());
  const Eigen::Index n0 = eigenvalues.size();
  if (n0 < 3 || !(eigenvalues(0) > 0.0)) throw NumericalError("estimate_gamma: degenerate spectrum");
  const double cutoff = eigenvalues(0) * kEigenTruncation;
  Eigen::Index last = 0;
  while (last < n0 && eigenvalues(last) >= cutoff && eigenvalues(last) > 0.0) ++last;
  if (last < 3) throw NumericalError("estimate_gamma: fewer than 3 eigenvalues above the truncation cutoff");
  std::vector<double> lx(static_cast<std::size_t>(last)), ly(static_cast<std::size_t>(last));
  for (Eigen::Index i = 0; i < last; ++i) {
    lx[static_cast<std::size_t>(i)] = std::log(static_cast<double>(i + 1));
    ly[static_cast<std::size_t>(i)] = -std::log(eigenvalues(i));
  }
  const LineFit f = ols(lx, ly);
  return {f.slope, n0, seed, 1, last, f.r2};
}

/// Uniform points on [0,1]^dim from a seeded stream.
inline PointSet uniform_points(Eigen::Index n, Eigen::Index dim, std::uint64_t seed) {
  CounterRng rng(seed);
  PointSet::Matrix m(n, dim);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index t = 0; t < dim; ++t) m(i, t) = rng.uniform();
  return PointSet(std::move(m));
}

/// Draws n0 uniform points on [0,1]^2, forms the covariance matrix without
/// nugget, and regresses -log(lambda_i) on log(i).
inline GammaEstimate estimate_gamma(const CovarianceSpec& spec, Eigen::Index n0, std::uint64_t seed,
                                    const Parallelism& par = {}) {
  if (n0 < 100) throw DomainError("estimate_gamma: n0 must be >= 100");
  const PointSet pts = uniform_points(n0, 2, seed);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov_matrix(pts, spec, par), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("estimate_gamma: eigen-decomposition failed");
  return gamma_from_eigenvalues(es.eigenvalues(), seed);
}

inline void write_gamma_header(std::ostream& os) {
  csv::Writer(os).header({"gamma", "n0", "seed", "r2", "fit_lo", "fit_hi"});
}

inline void write_gamma_row(std::ostream& os, const GammaEstimate& g) {
  csv::Writer w(os);
  w.field(g.gamma).field(static_cast<long long>(g.n0)).field(static_cast<unsigned long long>(g.seed)).field(g.r2);
  w.field(static_cast<long long>(g.fit_lo)).field(static_cast<long long>(g.fit_hi));
  w.end_row();
}

}  // namespace lowrank_gp
