// Simulate a Matern field, then compare full kriging with a low-rank
// predictor on support-point knots.

#include <iostream>

#include "lowrank_gp/lowrank_gp.hpp"

using namespace lowrank_gp;

int main() {
  const Parallelism par = Parallelism::from_env();
  const CovarianceSpec truth(1.5, 0.169, 1.5, 0.27);

  const PointSet locs = uniform_points(2500, 2, 42);
  const Dataset field = sample_gp(locs, truth, 7, kDefaultDenseCap, par);

  std::vector<Eigen::Index> train_idx, test_idx;
  for (Eigen::Index i = 0; i < locs.size(); ++i) (i < 2000 ? train_idx : test_idx).push_back(i);
  const Dataset train = add_noise(field.select(train_idx), truth.tau2(), 8);
  const Dataset test = field.select(test_idx);

  const Predictor full = fit_full(train, truth, par);
  std::cout << "full      rmspe " << evaluate(full, test.locations(), test.values(), par).rmspe << '\n';

  for (Eigen::Index k : {36, 100, 256}) {
    const KnotSet knots = support_points(train.locations(), k, 1, {}, par);
    const Predictor lr = fit_lowrank(train, truth, knots, par);
    const PredictionReport r = evaluate(lr, test.locations(), test.values(), par);
    std::cout << "sp k=" << k << (k < 100 ? "  " : " ") << " rmspe " << r.rmspe << "  energy " << *knots.energy_to_data
              << '\n';
  }
}
