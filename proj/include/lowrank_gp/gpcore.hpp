#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "lowrank_gp/cholesky.hpp"
#include "lowrank_gp/errors.hpp"
#include "lowrank_gp/kernel.hpp"
#include "lowrank_gp/nelder_mead.hpp"
#include "lowrank_gp/parallel.hpp"
#include "lowrank_gp/rng.hpp"

namespace lowrank_gp {

/// Largest problem handled with dense O(n^2) memory / O(n^3) time algebra.
inline constexpr Eigen::Index kDefaultDenseCap = 12000;

enum class DataKind { Observed, Latent };

/// Locations paired with responses (observed, noisy) or latent function values.
class Dataset {
 public:
  Dataset(PointSet locations, Eigen::VectorXd values, DataKind kind)
      : locations_(std::move(locations)), values_(std::move(values)), kind_(kind) {
    if (locations_.size() != values_.size()) {
      throw DomainError("Dataset: " + std::to_string(values_.size()) + " values for " +
                        std::to_string(locations_.size()) + " locations");
    }
    if (!values_.allFinite()) throw DomainError("Dataset: values must be finite");
  }

  const PointSet& locations() const noexcept { return locations_; }
  const Eigen::VectorXd& values() const noexcept { return values_; }
  DataKind kind() const noexcept { return kind_; }
  Eigen::Index size() const noexcept { return values_.size(); }

  template <typename IndexRange>
  Dataset select(const IndexRange& idx) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(std::size(idx)));
    Eigen::Index r = 0;
    for (auto i : idx) v(r++) = values_(static_cast<Eigen::Index>(i));
    return {locations_.select(idx), std::move(v), kind_};
  }

  Dataset with_values(Eigen::VectorXd values, DataKind kind) const { return {locations_, std::move(values), kind}; }

 private:
  PointSet locations_;
  Eigen::VectorXd values_;
  DataKind kind_;
};

inline void require_dense_cap(Eigen::Index n, Eigen::Index cap, const char* where) {
  if (n > cap) {
    throw CapacityError(std::string(where) + ": n = " + std::to_string(n) + " exceeds the dense cap " +
                        std::to_string(cap) + " (raise it with --dense-cap)");
  }
}

/// Draws f = L z at the given locations, z iid N(0, 1) from the seeded stream.
/// Coincident locations share one draw, so they receive identical values.
inline Dataset sample_gp(const PointSet& locations, const CovarianceSpec& spec, std::uint64_t seed,
                         Eigen::Index dense_cap = kDefaultDenseCap, const Parallelism& par = {}) {
  require_dense_cap(locations.size(), dense_cap, "sample_gp");
  const Eigen::Index n = locations.size();
  std::vector<Eigen::Index> unique_of(static_cast<std::size_t>(n));
  std::vector<Eigen::Index> unique_rows;
  {
    std::map<std::vector<double>, Eigen::Index> seen;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto row = locations.point(i);
      std::vector<double> key(row.begin(), row.end());
      auto [it, inserted] = seen.try_emplace(std::move(key), static_cast<Eigen::Index>(unique_rows.size()));
      if (inserted) unique_rows.push_back(i);
      unique_of[static_cast<std::size_t>(i)] = it->second;
    }
  }
  const PointSet unique = locations.select(unique_rows);
  const CholFactor chol = CholFactor::factorize(cov_matrix(unique, spec, par), spec.sigma2());
  CounterRng rng(seed);
  Eigen::VectorXd z(unique.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  const Eigen::VectorXd fu = chol.lower_multiply(z);
  Eigen::VectorXd f(n);
  for (Eigen::Index i = 0; i < n; ++i) f(i) = fu(unique_of[static_cast<std::size_t>(i)]);
  return {locations, std::move(f), DataKind::Latent};
}

/// y = f + eps, eps iid N(0, tau2).
inline Dataset add_noise(const Dataset& data, double tau2, std::uint64_t seed) {
  if (!(std::isfinite(tau2) && tau2 >= 0.0)) throw DomainError("add_noise: tau2 must be >= 0");
  Eigen::VectorXd y = data.values();
  if (tau2 > 0.0) {
    CounterRng rng(seed);
    const double sd = std::sqrt(tau2);
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += sd * rng.normal();
  }
  return data.with_values(std::move(y), DataKind::Observed);
}

/// Cholesky factor of C + tau2 I for the dataset's locations.
inline CholFactor factorize_covariance(const PointSet& locations, const CovarianceSpec& spec,
                                       const Parallelism& par = {}) {
  Eigen::MatrixXd c = cov_matrix(locations, spec, par);
  c.diagonal().array() += spec.tau2();
  return CholFactor::factorize(std::move(c), spec.sigma2());
}

/// Gaussian negative log-likelihood
///   n/2 log(2 pi) + 1/2 log|C + tau2 I| + 1/2 y^T (C + tau2 I)^{-1} y.
inline double nll(const Dataset& data, const CovarianceSpec& spec, Eigen::Index dense_cap = kDefaultDenseCap,
                  const Parallelism& par = {}) {
  require_dense_cap(data.size(), dense_cap, "nll");
  const CholFactor chol = factorize_covariance(data.locations(), spec, par);
  const Eigen::VectorXd alpha = chol.half_solve(data.values());
  const double n = static_cast<double>(data.size());
  return 0.5 * n * std::log(2.0 * std::numbers::pi) + 0.5 * chol.log_det() + 0.5 * alpha.squaredNorm();
}

/// Which of (sigma2, psi, nu, tau2) the MLE may move.
struct ParameterMask {
  bool sigma2 = true;
  bool psi = true;
  bool nu = false;
  bool tau2 = true;

  static ParameterMask none() { return {false, false, false, false}; }
};

struct MleFit {
  CovarianceSpec spec;
  double nll = 0.0;
  double init_nll = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<double> trace;  // best nll per Nelder-Mead iteration
};

/// Maximum-likelihood fit by Nelder-Mead on the log of the free parameters.
/// Returns the best point found; `converged` is false when max_iter was hit.
inline MleFit fit_mle(const Dataset& data, const CovarianceSpec& init, const ParameterMask& free,
                      const NelderMeadOptions& opts = {}, Eigen::Index dense_cap = kDefaultDenseCap,
                      const Parallelism& par = {}) {
  require_dense_cap(data.size(), dense_cap, "fit_mle");
  const std::array<bool, 4> mask = {free.sigma2, free.psi, free.nu, free.tau2};
  const std::array<double, 4> base = {init.sigma2(), init.psi(), init.nu(), init.tau2()};
  if (free.tau2 && !(init.tau2() > 0.0)) throw DomainError("fit_mle: a free tau2 needs a positive initial value");

  Eigen::VectorXd start(std::count(mask.begin(), mask.end(), true));
  for (std::size_t p = 0, j = 0; p < 4; ++p)
    if (mask[p]) start(static_cast<Eigen::Index>(j++)) = std::log(base[p]);

  auto to_spec = [&](const Eigen::VectorXd& theta) {
    std::array<double, 4> v = base;
    for (std::size_t p = 0, j = 0; p < 4; ++p)
      if (mask[p]) v[p] = std::exp(theta(static_cast<Eigen::Index>(j++)));
    return CovarianceSpec(v[0], v[1], v[2], v[3]);
  };
  auto objective = [&](const Eigen::VectorXd& theta) {
    try {
      return nll(data, to_spec(theta), dense_cap, par);
    } catch (const DomainError&) {
      return std::numeric_limits<double>::infinity();
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  const double init_value = nll(data, init, dense_cap, par);
  if (start.size() == 0) return {init, init_value, init_value, true, 0, {}};

  const NelderMeadResult nm = nelder_mead(objective, start, opts);
  MleFit out{to_spec(nm.argmin), nm.value, init_value, nm.converged, nm.iterations, nm.best_trace};
  if (!(out.nll <= init_value)) {
    out.spec = init;
    out.nll = init_value;
  }
  return out;
}

}  // namespace lowrank_gp
