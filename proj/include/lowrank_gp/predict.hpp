#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

#include "lowrank_gp/cholesky.hpp"
#include "lowrank_gp/csv.hpp"
#include "lowrank_gp/errors.hpp"
#include "lowrank_gp/gpcore.hpp"
#include "lowrank_gp/kernel.hpp"
#include "lowrank_gp/knots.hpp"
#include "lowrank_gp/parallel.hpp"

namespace lowrank_gp {

enum class PredictorKind { Full, LowRank };

/// Fitted point predictor f(x) = k(x)^T w, where k(x) is the covariance
/// between x and the basis locations (training sites for Full, knots for
/// LowRank) under the predictor's spec. Immutable once fitted.
///
/// Full:    w = (C + tau2 I)^{-1} y.
/// LowRank: w = (tau2 C* + B^T B)^{-1} B^T y with B = C*_nk (n x k). This is
///          the Sherman-Morrison-Woodbury form of the predictive-process
///          predictor c*(x)^T C*^{-1} B^T (B C*^{-1} B^T + tau2 I)^{-1} y,
///          simplified by C*^{-1} B^T (B C*^{-1} B^T + tau2 I)^{-1}
///          = (tau2 C* + B^T B)^{-1} B^T; only k x k systems are solved.
class Predictor {
 public:
  PredictorKind kind() const noexcept { return kind_; }
  const CovarianceSpec& spec() const noexcept { return spec_; }
  const Dataset& train() const noexcept { return *train_; }
  const std::optional<KnotSet>& knots() const noexcept { return knots_; }
  const Eigen::VectorXd& weights() const noexcept { return weights_; }
  double jitter_used() const noexcept { return jitter_used_; }
  double fit_seconds() const noexcept { return fit_seconds_; }

  /// Point predictions at each test location.
  Eigen::VectorXd predict(const PointSet& test, const Parallelism& par = {}) const {
    const PointSet& basis = kind_ == PredictorKind::Full ? train_->locations() : knots_->points;
    if (test.empty()) return Eigen::VectorXd(0);
    require_same_dim(test, basis, "predict_at");
    const MaternKernel k(spec_);
    Eigen::VectorXd out(test.size());
    parallel_for(0, static_cast<std::size_t>(test.size()), par, [&](std::size_t ii) {
      const auto i = static_cast<Eigen::Index>(ii);
      double s = 0.0;
      for (Eigen::Index j = 0; j < basis.size(); ++j) s += k.between(test.point(i), basis.point(j)) * weights_(j);
      out(i) = s;
    });
    return out;
  }

  /// Same fitted geometry with a different nugget. For LowRank the n x k
  /// products are reused, so only the k x k system is refactorized.
  Predictor with_tau2(double tau2, const Parallelism& par = {}) const;

  friend Predictor fit_full(const Dataset&, const CovarianceSpec&, const Parallelism&, Eigen::Index);
  friend Predictor fit_lowrank(const Dataset&, const CovarianceSpec&, const KnotSet&, const Parallelism&);

 private:
  Predictor(PredictorKind kind, const CovarianceSpec& spec, std::shared_ptr<const Dataset> train)
      : kind_(kind), spec_(spec), train_(std::move(train)) {}

  struct LowRankCache {
    Eigen::MatrixXd knot_cov;  // C*
    Eigen::MatrixXd gram;      // B^T B
    Eigen::VectorXd bty;       // B^T y
  };

  void solve_lowrank() {
    const auto& c = *cache_;
    Eigen::MatrixXd system = spec_.tau2() * c.knot_cov;
    system += c.gram;
    const double scale = system.diagonal().mean();
    const CholFactor chol = CholFactor::factorize(std::move(system), scale > 0.0 ? scale : 1.0);
    weights_ = chol.solve(c.bty);
    jitter_used_ = chol.jitter_used();
  }

  PredictorKind kind_;
  CovarianceSpec spec_;
  std::shared_ptr<const Dataset> train_;
  std::optional<KnotSet> knots_;
  std::shared_ptr<const LowRankCache> cache_;
  Eigen::VectorXd weights_;
  double jitter_used_ = 0.0;
  double fit_seconds_ = 0.0;
};

namespace detail {
inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}
}  // namespace detail

/// Exact kriging predictor; one O(n^3) factorization of C + tau2 I.
inline Predictor fit_full(const Dataset& train, const CovarianceSpec& spec, const Parallelism& par = {},
                          Eigen::Index dense_cap = kDefaultDenseCap) {
  require_dense_cap(train.size(), dense_cap, "fit_full");
  const auto t0 = std::chrono::steady_clock::now();
  Predictor p(PredictorKind::Full, spec, std::make_shared<const Dataset>(train));
  const CholFactor chol = factorize_covariance(train.locations(), spec, par);
  p.weights_ = chol.solve(train.values());
  p.jitter_used_ = chol.jitter_used();
  p.fit_seconds_ = detail::seconds_since(t0);
  return p;
}

/// Predictive-process predictor on the given knots; O(n k^2) time.
inline Predictor fit_lowrank(const Dataset& train, const CovarianceSpec& spec, const KnotSet& knots,
                             const Parallelism& par = {}) {
  if (!(spec.tau2() > 0.0)) {
    throw DomainError("fit_lowrank: tau2 must be > 0 for the low-rank system; use fit_full for interpolation");
  }
  if (knots.k() < 1) throw DomainError("fit_lowrank: knot set is empty");
  require_same_dim(train.locations(), knots.points, "fit_lowrank");
  const auto t0 = std::chrono::steady_clock::now();
  Predictor p(PredictorKind::LowRank, spec, std::make_shared<const Dataset>(train));
  p.knots_ = knots;
  const Eigen::MatrixXd b = cov_matrix(train.locations(), knots.points, spec, par);
  auto cache = std::make_shared<Predictor::LowRankCache>();
  cache->knot_cov = cov_matrix(knots.points, spec, par);
  cache->gram = Eigen::MatrixXd::Zero(knots.k(), knots.k());
  cache->gram.selfadjointView<Eigen::Lower>().rankUpdate(b.transpose());
  detail::mirror_lower(cache->gram);
  cache->bty = b.transpose() * train.values();
  p.cache_ = std::move(cache);
  p.solve_lowrank();
  p.fit_seconds_ = detail::seconds_since(t0);
  return p;
}

inline Predictor Predictor::with_tau2(double tau2, const Parallelism& par) const {
  if (kind_ == PredictorKind::Full) return fit_full(*train_, spec_.with_tau2(tau2), par);
  if (!(tau2 > 0.0)) throw DomainError("with_tau2: tau2 must be > 0 for a low-rank predictor");
  const auto t0 = std::chrono::steady_clock::now();
  Predictor p = *this;
  p.spec_ = spec_.with_tau2(tau2);
  p.solve_lowrank();
  p.fit_seconds_ = detail::seconds_since(t0);
  return p;
}

inline Eigen::VectorXd predict_at(const Predictor& p, const PointSet& test, const Parallelism& par = {}) {
  return p.predict(test, par);
}

struct Score {
  double rmspe = 0.0;
  double mspe = 0.0;
};

/// Mean squared prediction error against `truth` (latent f for simulations,
/// held-out y for real data) and its square root.
inline Score score(const Eigen::VectorXd& predictions, const Eigen::VectorXd& truth) {
  if (predictions.size() != truth.size()) {
    throw DomainError("score: " + std::to_string(predictions.size()) + " predictions vs " +
                      std::to_string(truth.size()) + " truth values");
  }
  if (predictions.size() == 0) throw DomainError("score: empty input");
  const double mspe = (predictions - truth).squaredNorm() / static_cast<double>(truth.size());
  return {std::sqrt(mspe), mspe};
}

struct PredictionReport {
  Eigen::VectorXd predictions;
  double rmspe = 0.0;
  double mspe = 0.0;
  double wall_time_fit = 0.0;
  double wall_time_predict = 0.0;
};

/// Predicts at `test` and scores against `truth`.
inline PredictionReport evaluate(const Predictor& p, const PointSet& test, const Eigen::VectorXd& truth,
                                 const Parallelism& par = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  PredictionReport r;
  r.predictions = p.predict(test, par);
  r.wall_time_predict = detail::seconds_since(t0);
  r.wall_time_fit = p.fit_seconds();
  const Score s = score(r.predictions, truth);
  r.rmspe = s.rmspe;
  r.mspe = s.mspe;
  return r;
}

inline void write_report_header(std::ostream& os) {
  csv::Writer(os).header({"method", "k", "seed", "rmspe", "mspe", "fit_s", "predict_s"});
}

inline void write_report_row(std::ostream& os, std::string_view method, Eigen::Index k, std::uint64_t seed,
                             const PredictionReport& r) {
  csv::Writer w(os);
  w.field(method).field(static_cast<long long>(k)).field(static_cast<unsigned long long>(seed));
  w.field(r.rmspe).field(r.mspe).field(r.wall_time_fit).field(r.wall_time_predict);
  w.end_row();
}

}  // namespace lowrank_gp
