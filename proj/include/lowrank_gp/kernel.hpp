#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <string>

#include "lowrank_gp/bessel.hpp"
#include "lowrank_gp/cholesky.hpp"
#include "lowrank_gp/errors.hpp"
#include "lowrank_gp/parallel.hpp"

namespace lowrank_gp {

/// Matern parameters (sigma2, psi, nu) plus the nugget variance tau2.
class CovarianceSpec {
 public:
  CovarianceSpec(double sigma2, double psi, double nu, double tau2 = 0.0)
      : sigma2_(sigma2), psi_(psi), nu_(nu), tau2_(tau2) {
    if (!(std::isfinite(sigma2) && sigma2 > 0.0)) throw DomainError("CovarianceSpec: sigma2 must be > 0");
    if (!(std::isfinite(psi) && psi > 0.0)) throw DomainError("CovarianceSpec: psi must be > 0");
    if (!(std::isfinite(nu) && nu > 0.0)) throw DomainError("CovarianceSpec: nu must be > 0");
    if (!(std::isfinite(tau2) && tau2 >= 0.0)) throw DomainError("CovarianceSpec: tau2 must be >= 0");
  }

  double sigma2() const noexcept { return sigma2_; }
  double psi() const noexcept { return psi_; }
  double nu() const noexcept { return nu_; }
  double tau2() const noexcept { return tau2_; }

  CovarianceSpec with_tau2(double tau2) const { return {sigma2_, psi_, nu_, tau2}; }
  CovarianceSpec with_nu(double nu) const { return {sigma2_, psi_, nu, tau2_}; }

  /// sigma2 / psi^(2 nu), the parameter identified under infill asymptotics.
  double microergodic() const { return sigma2_ / std::pow(psi_, 2.0 * nu_); }

  friend bool operator==(const CovarianceSpec&, const CovarianceSpec&) = default;

 private:
  double sigma2_;
  double psi_;
  double nu_;
  double tau2_;
};

/// Ordered set of d-dimensional locations stored one point per row.
class PointSet {
 public:
  using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  PointSet() = default;

  explicit PointSet(Matrix coords) : coords_(std::move(coords)) {
    if (coords_.rows() > 0 && coords_.cols() < 1) throw DomainError("PointSet: dimension must be >= 1");
    if (!coords_.allFinite()) throw DomainError("PointSet: coordinates must be finite");
  }

  /// Empty set with a fixed dimension.
  static PointSet empty(Eigen::Index dim) { return PointSet(Matrix(0, dim)); }

  Eigen::Index size() const noexcept { return coords_.rows(); }
  Eigen::Index dim() const noexcept { return coords_.cols(); }
  bool empty() const noexcept { return coords_.rows() == 0; }

  auto point(Eigen::Index i) const { return coords_.row(i); }
  const Matrix& coords() const noexcept { return coords_; }

  /// Subset by row indices, in the given order.
  template <typename IndexRange>
  PointSet select(const IndexRange& idx) const {
    Matrix out(static_cast<Eigen::Index>(std::size(idx)), dim());
    Eigen::Index r = 0;
    for (auto i : idx) out.row(r++) = coords_.row(static_cast<Eigen::Index>(i));
    return PointSet(std::move(out));
  }

  /// Concatenation (same dimension required).
  PointSet concat(const PointSet& other) const {
    if (empty()) return other;
    if (other.empty()) return *this;
    if (other.dim() != dim()) throw DomainError("PointSet::concat: dimension mismatch");
    Matrix out(size() + other.size(), dim());
    out << coords_, other.coords_;
    return PointSet(std::move(out));
  }

 private:
  Matrix coords_;
};

inline void require_same_dim(const PointSet& a, const PointSet& b, const char* where) {
  if (!a.empty() && !b.empty() && a.dim() != b.dim()) {
    throw DomainError(std::string(where) + ": dimension mismatch (" + std::to_string(a.dim()) + " vs " +
                      std::to_string(b.dim()) + ")");
  }
}

/// Matern covariance function with per-spec constants hoisted out of the
/// evaluation loop. Does not include the nugget.
class MaternKernel {
 public:
  explicit MaternKernel(const CovarianceSpec& spec) : spec_(spec), inv_psi_(1.0 / spec.psi()) {}

  const CovarianceSpec& spec() const noexcept { return spec_; }

  double operator()(double dist) const {
    if (!std::isfinite(dist) || dist < 0.0) throw DomainError("matern: distance must be finite and >= 0");
    return spec_.sigma2() * bessel::matern_correlation(dist * inv_psi_, spec_.nu());
  }

  template <typename A, typename B>
  double between(const Eigen::MatrixBase<A>& x1, const Eigen::MatrixBase<B>& x2) const {
    return (*this)((x1 - x2).norm());
  }

 private:
  CovarianceSpec spec_;
  double inv_psi_;
};

/// sigma2 * 2^(1-nu)/Gamma(nu) * (dist/psi)^nu * K_nu(dist/psi); sigma2 at 0.
inline double matern(double dist, const CovarianceSpec& spec) { return MaternKernel(spec)(dist); }

/// Cross-covariance matrix {c(a_i, b_j)}, |a| x |b|. Rows are filled in
/// parallel; each entry is computed exactly once.
inline Eigen::MatrixXd cov_matrix(const PointSet& a, const PointSet& b, const CovarianceSpec& spec,
                                  const Parallelism& par = {}) {
  require_same_dim(a, b, "cov_matrix");
  const MaternKernel k(spec);
  Eigen::MatrixXd out(a.size(), b.size());
  if (&a == &b) {
    parallel_for(0, static_cast<std::size_t>(a.size()), par, [&](std::size_t ii) {
      const auto i = static_cast<Eigen::Index>(ii);
      out(i, i) = spec.sigma2();
      for (Eigen::Index j = 0; j < i; ++j) out(i, j) = k.between(a.point(i), a.point(j));
    });
    detail::mirror_lower(out);
    return out;
  }
  parallel_for(0, static_cast<std::size_t>(a.size()), par, [&](std::size_t ii) {
    const auto i = static_cast<Eigen::Index>(ii);
    for (Eigen::Index j = 0; j < b.size(); ++j) out(i, j) = k.between(a.point(i), b.point(j));
  });
  return out;
}

/// Symmetric covariance matrix of one point set.
inline Eigen::MatrixXd cov_matrix(const PointSet& a, const CovarianceSpec& spec, const Parallelism& par = {}) {
  return cov_matrix(a, a, spec, par);
}

/// Nystrom (predictive-process) kernel c*(x1)^T C*^{-1} c*(x2) induced by a
/// knot set. C* is factorized once with the jitter ladder.
class LowRankKernel {
 public:
  LowRankKernel(PointSet knots, const CovarianceSpec& spec)
      : knots_(std::move(knots)),
        kernel_(spec),
        knot_factor_(factorize_knots(knots_, spec)) {}

  const PointSet& knots() const noexcept { return knots_; }
  double jitter_used() const noexcept { return knot_factor_.jitter_used(); }

  /// c*(x) for a single location.
  template <typename X>
  Eigen::VectorXd knot_cov(const Eigen::MatrixBase<X>& x) const {
    if (x.size() != knots_.dim()) throw DomainError("LowRankKernel: dimension mismatch");
    Eigen::VectorXd c(knots_.size());
    for (Eigen::Index j = 0; j < knots_.size(); ++j) c(j) = kernel_.between(x, knots_.point(j));
    return c;
  }

  template <typename X1, typename X2>
  double operator()(const Eigen::MatrixBase<X1>& x1, const Eigen::MatrixBase<X2>& x2) const {
    const Eigen::VectorXd w1 = knot_factor_.half_solve(knot_cov(x1));
    const Eigen::VectorXd w2 = knot_factor_.half_solve(knot_cov(x2));
    return w1.dot(w2);
  }

 private:
  static CholFactor factorize_knots(const PointSet& knots, const CovarianceSpec& spec) {
    if (knots.empty()) throw DomainError("LowRankKernel: knot set is empty");
    return CholFactor::factorize(cov_matrix(knots, spec), spec.sigma2());
  }

  PointSet knots_;
  MaternKernel kernel_;
  CholFactor knot_factor_;
};

template <typename X1, typename X2>
double lowrank_kernel(const Eigen::MatrixBase<X1>& x1, const Eigen::MatrixBase<X2>& x2, const PointSet& knots,
                      const CovarianceSpec& spec) {
  return LowRankKernel(knots, spec)(x1, x2);
}

}  // namespace lowrank_gp
