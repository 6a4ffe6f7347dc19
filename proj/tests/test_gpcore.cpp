#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "lowrank_gp/complexity.hpp"
#include "lowrank_gp/gpcore.hpp"
#include "lowrank_gp/nelder_mead.hpp"

using namespace lowrank_gp;

namespace {

PointSet line_points(std::initializer_list<double> xs) {
  PointSet::Matrix m(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) m(i++, 0) = x;
  return PointSet(std::move(m));
}

double sample_variance(const std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST(CholFactor, ReconstructsInput) {
  const PointSet p = uniform_points(120, 2, 3);
  const CovarianceSpec s(1.5, 0.169, 1.5);
  Eigen::MatrixXd c = cov_matrix(p, s);
  c.diagonal().array() += 0.27;
  const CholFactor f = CholFactor::factorize(c, s.sigma2());
  EXPECT_EQ(f.jitter_used(), 0.0);
  EXPECT_LT((f.reconstruct() - c).norm() / c.norm(), 1e-8);
}

TEST(CholFactor, SolveRoundTrip) {
  const PointSet p = uniform_points(80, 2, 4);
  Eigen::MatrixXd c = cov_matrix(p, {1.0, 0.2, 2.5});
  c.diagonal().array() += 0.5;
  const CholFactor f = CholFactor::factorize(c, 1.0);
  Eigen::VectorXd b(80);
  CounterRng rng(9);
  for (Eigen::Index i = 0; i < 80; ++i) b(i) = rng.normal();
  const Eigen::VectorXd x = f.solve(b);
  EXPECT_LT((c * x - b).norm() / b.norm(), 1e-8);
  const Eigen::MatrixXd bb = Eigen::MatrixXd::Identity(80, 3);
  EXPECT_LT((c * f.solve(bb) - bb).norm(), 1e-8);
}

TEST(CholFactor, LogDetMatchesDirect) {
  Eigen::MatrixXd a(2, 2);
  a << 2.0, 1.0, 1.0, 2.0;
  EXPECT_NEAR(CholFactor::factorize(a, 1.0).log_det(), std::log(3.0), 1e-14);
}

TEST(CholFactor, JitterEscalatesOnSingularMatrix) {
  const PointSet p = line_points({0.0, 0.0, 0.5});
  const Eigen::MatrixXd c = cov_matrix(p, {1.0, 0.3, 1.5});
  const CholFactor f = CholFactor::factorize(c, 1.0);
  EXPECT_GT(f.jitter_used(), 0.0);
  EXPECT_LT((f.reconstruct() - c).norm() / c.norm(), 1e-5);
}

TEST(CholFactor, FailureCarriesConditionEstimate) {
  Eigen::MatrixXd a(2, 2);
  a << 1.0, 0.0, 0.0, -1.0;
  try {
    (void)CholFactor::factorize(a, 1.0);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("condition"), std::string::npos);
    EXPECT_TRUE(std::isinf(e.condition_estimate()) || e.condition_estimate() != 0.0);
  }
}

TEST(SampleGp, SinglePointVarianceMatchesSigma2) {
  const PointSet p = line_points({0.3});
  const CovarianceSpec s(1.5, 0.169, 1.5);
  std::vector<double> draws;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) draws.push_back(sample_gp(p, s, seed).values()(0));
  const double v = sample_variance(draws);
  EXPECT_GE(v, 1.35);
  EXPECT_LE(v, 1.65);
}

TEST(SampleGp, VanishingVariance) {
  const Dataset d = sample_gp(uniform_points(50, 2, 1), {1e-20, 0.169, 1.5}, 3);
  EXPECT_LT(d.values().cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_EQ(d.kind(), DataKind::Latent);
}

TEST(SampleGp, CoincidentLocationsShareValue) {
  const PointSet p = line_points({0.1, 0.4, 0.1, 0.9});
  const Dataset d = sample_gp(p, {1.5, 0.169, 1.5}, 11);
  EXPECT_NEAR(d.values()(0), d.values()(2), 1e-6);
}

TEST(SampleGp, DeterministicGivenSeed) {
  const PointSet p = uniform_points(200, 2, 5);
  const CovarianceSpec s(1.5, 0.169, 1.5);
  EXPECT_TRUE((sample_gp(p, s, 7).values().array() == sample_gp(p, s, 7).values().array()).all());
  EXPECT_FALSE((sample_gp(p, s, 7).values().array() == sample_gp(p, s, 8).values().array()).all());
}

TEST(SampleGp, CapacityErrorNamesOverride) {
  try {
    (void)sample_gp(uniform_points(20, 2, 1), {1.0, 0.1, 1.5}, 1, 10);
    FAIL() << "expected CapacityError";
  } catch (const CapacityError& e) {
    EXPECT_NE(std::string(e.what()).find("--dense-cap"), std::string::npos);
  }
}

TEST(SampleGp, EmpiricalCovarianceMatchesKernel) {
  const PointSet p = uniform_points(5, 2, 21);
  const CovarianceSpec s(1.5, 0.169, 1.5);
  const Eigen::MatrixXd c = cov_matrix(p, s);
  const int reps = 500;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(5, 5);
  for (int r = 0; r < reps; ++r) {
    const Eigen::VectorXd f = sample_gp(p, s, 1000 + static_cast<std::uint64_t>(r)).values();
    acc += f * f.transpose();
  }
  acc /= reps;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      const double se = std::sqrt((c(i, i) * c(j, j) + c(i, j) * c(i, j)) / reps);
      EXPECT_LT(std::abs(acc(i, j) - c(i, j)), 3.0 * se) << i << "," << j;
    }
  }
}

TEST(AddNoise, ZeroNuggetIsIdentity) {
  const Dataset f = sample_gp(uniform_points(30, 2, 1), {1.0, 0.2, 1.5}, 2);
  const Dataset y = add_noise(f, 0.0, 3);
  EXPECT_TRUE((y.values().array() == f.values().array()).all());
  EXPECT_EQ(y.kind(), DataKind::Observed);
}

TEST(AddNoise, NoiseVarianceBand) {
  const Eigen::Index n = 5000;
  const Dataset f(uniform_points(n, 2, 1), Eigen::VectorXd::Zero(n), DataKind::Latent);
  const Eigen::VectorXd e = add_noise(f, 0.27, 42).values();
  const std::vector<double> v(e.data(), e.data() + n);
  const double var = sample_variance(v);
  EXPECT_GE(var, 0.24);
  EXPECT_LE(var, 0.30);
}

TEST(AddNoise, DeterministicAndValidated) {
  const Dataset f(uniform_points(10, 2, 1), Eigen::VectorXd::Zero(10), DataKind::Latent);
  EXPECT_TRUE((add_noise(f, 0.27, 5).values().array() == add_noise(f, 0.27, 5).values().array()).all());
  EXPECT_THROW(add_noise(f, -0.1, 5), DomainError);
}

TEST(Dataset, SizeMismatchRejected) {
  EXPECT_THROW(Dataset(uniform_points(3, 2, 1), Eigen::VectorXd::Zero(2), DataKind::Observed), DomainError);
}

TEST(Nll, SinglePointStandardNormal) {
  const Dataset d(line_points({0.0}), Eigen::VectorXd::Zero(1), DataKind::Observed);
  EXPECT_NEAR(nll(d, {0.6, 1.0, 1.5, 0.4}), 0.5 * std::log(2.0 * std::numbers::pi), 1e-12);
}

TEST(Nll, TwoPointHandCase) {
  // C + tau2 I = [[2, 1], [1, 2]]: sigma2 = 1.5, tau2 = 0.5, exponential
  // kernel with 1.5 exp(-d) = 1. y^T A^{-1} y = 2 for y = (1, -1).
  const Dataset d(line_points({0.0, std::log(1.5)}), Eigen::Vector2d(1.0, -1.0), DataKind::Observed);
  const double expected = std::log(2.0 * std::numbers::pi) + 0.5 * std::log(3.0) + 1.0;
  EXPECT_NEAR(expected, 3.3871832107434003, 1e-14);
  EXPECT_NEAR(nll(d, {1.5, 1.0, 0.5, 0.5}), expected, 1e-12);
}

TEST(Nll, PermutationInvariant) {
  const CovarianceSpec s(1.5, 0.169, 1.5, 0.27);
  const Dataset d = add_noise(sample_gp(uniform_points(60, 2, 3), s, 4), 0.27, 5);
  std::vector<Eigen::Index> perm(60);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::swap(perm[3], perm[40]);
  EXPECT_NEAR(nll(d, s), nll(d.select(perm), s), 1e-9);
}

TEST(Nll, CapacityChecked) {
  const Dataset d(uniform_points(20, 2, 1), Eigen::VectorXd::Zero(20), DataKind::Observed);
  EXPECT_THROW(nll(d, {1.0, 0.1, 1.5, 0.1}, 10), CapacityError);
}

TEST(NelderMead, MinimizesQuadratic) {
  auto f = [](const Eigen::VectorXd& x) { return (x - Eigen::Vector2d(1.0, -2.0)).squaredNorm() + 3.0; };
  const NelderMeadResult r = nelder_mead(f, Eigen::Vector2d(0.0, 0.0));
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.argmin(0), 1.0, 1e-5);
  EXPECT_NEAR(r.argmin(1), -2.0, 1e-5);
  EXPECT_NEAR(r.value, 3.0, 1e-10);
  for (std::size_t i = 1; i < r.best_trace.size(); ++i) EXPECT_LE(r.best_trace[i], r.best_trace[i - 1]);
}

TEST(NelderMead, IterationCapReportsNonConvergence) {
  auto f = [](const Eigen::VectorXd& x) { return x.squaredNorm(); };
  NelderMeadOptions o;
  o.max_iter = 3;
  const NelderMeadResult r = nelder_mead(f, Eigen::Vector3d(5.0, 5.0, 5.0), o);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 3);
}

TEST(FitMle, FrozenMaskReturnsInit) {
  const CovarianceSpec s(1.5, 0.169, 1.5, 0.27);
  const Dataset d = add_noise(sample_gp(uniform_points(80, 2, 3), s, 4), 0.27, 5);
  const MleFit fit = fit_mle(d, s, ParameterMask::none());
  EXPECT_EQ(fit.spec, s);
  EXPECT_EQ(fit.nll, fit.init_nll);
}

TEST(FitMle, DescentAndMonotoneTrace) {
  const CovarianceSpec truth(1.5, 0.169, 1.5, 0.27);
  const Dataset d = add_noise(sample_gp(uniform_points(150, 2, 6), truth, 7), 0.27, 8);
  const CovarianceSpec init(0.8, 0.3, 1.5, 0.6);
  const MleFit fit = fit_mle(d, init, {});
  EXPECT_LE(fit.nll, fit.init_nll);
  EXPECT_NEAR(fit.nll, nll(d, fit.spec), 1e-9);
  EXPECT_EQ(fit.spec.nu(), 1.5);
  for (std::size_t i = 1; i < fit.trace.size(); ++i) EXPECT_LE(fit.trace[i], fit.trace[i - 1]);

  // Restarting at the optimum cannot make things worse.
  const MleFit again = fit_mle(d, fit.spec, {});
  EXPECT_LE(again.nll, again.init_nll);
}
