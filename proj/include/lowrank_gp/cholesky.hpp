#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "lowrank_gp/errors.hpp"

namespace lowrank_gp {

/// Diagonal jitter ladder, as multiples of the caller's scale.
inline constexpr std::array<double, 4> kJitterLadder = {0.0, 1e-10, 1e-8, 1e-6};

namespace detail {

/// Copies the strict lower triangle onto the strict upper one.
inline void mirror_lower(Eigen::MatrixXd& a) {
  for (Eigen::Index j = 1; j < a.cols(); ++j) a.col(j).head(j) = a.row(j).head(j).transpose();
}

/// Copies the strict upper triangle onto the strict lower one.
inline void mirror_upper(Eigen::MatrixXd& a) {
  for (Eigen::Index j = 1; j < a.cols(); ++j) a.row(j).head(j) = a.col(j).head(j).transpose();
}

}  // namespace detail

/// Lower Cholesky factor of a symmetric positive definite matrix, possibly
/// after adding `jitter_used * scale` to the diagonal.
class CholFactor {
 public:
  /// Factorizes `a` in place (only the lower triangle is read), escalating
  /// through kJitterLadder until the factorization succeeds.
  static CholFactor factorize(Eigen::MatrixXd a, double jitter_scale) {
    if (a.rows() != a.cols()) throw DomainError("CholFactor: matrix is not square");
    if (!(jitter_scale > 0.0) || !std::isfinite(jitter_scale)) {
      throw DomainError("CholFactor: jitter scale must be positive and finite");
    }
    const Eigen::VectorXd diag = a.diagonal();
    for (double eps : kJitterLadder) {
      a.diagonal() = diag.array() + eps * jitter_scale;
      Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(a);
      if (llt.info() == Eigen::Success && a.diagonal().allFinite()) {
        CholFactor f;
        f.factor_ = std::move(a);
        f.jitter_used_ = eps;
        f.factor_.triangularView<Eigen::StrictlyUpper>().setZero();
        return f;
      }
      // The strict upper triangle still holds the input.
      detail::mirror_upper(a);
    }
    a.diagonal() = diag;
    std::ostringstream msg;
    const double cond = condition_estimate(a);
    msg << "Cholesky failed after jitter " << kJitterLadder.back() << " x " << jitter_scale
        << " (n = " << a.rows() << ", condition estimate " << cond << ")";
    throw NumericalError(msg.str(), cond);
  }

  Eigen::Index size() const noexcept { return factor_.rows(); }
  double jitter_used() const noexcept { return jitter_used_; }
  auto matrix_l() const { return factor_.triangularView<Eigen::Lower>(); }

  /// Reconstruction L L^T (testing and diagnostics).
  Eigen::MatrixXd reconstruct() const {
    const Eigen::MatrixXd l = matrix_l();
    return l * l.transpose();
  }

  template <typename Rhs>
  Eigen::MatrixXd solve(const Eigen::MatrixBase<Rhs>& b) const {
    Eigen::MatrixXd x = matrix_l().solve(b);
    factor_.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
    return x;
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
    Eigen::VectorXd x = matrix_l().solve(b);
    factor_.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
    return x;
  }

  /// L^{-1} b.
  Eigen::VectorXd half_solve(const Eigen::VectorXd& b) const { return matrix_l().solve(b); }

  /// L z.
  Eigen::VectorXd lower_multiply(const Eigen::VectorXd& z) const { return matrix_l() * z; }

  /// log |A| of the (jittered) input.
  double log_det() const { return 2.0 * factor_.diagonal().array().log().sum(); }

 private:
  CholFactor() = default;

  static double condition_estimate(const Eigen::MatrixXd& a) {
    if (a.rows() > 2000) return std::numeric_limits<double>::infinity();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    if (ev.size() == 0 || ev(0) <= 0.0) return std::numeric_limits<double>::infinity();
    return ev(ev.size() - 1) / ev(0);
  }

  Eigen::MatrixXd factor_;
  double jitter_used_ = 0.0;
};

}  // namespace lowrank_gp
