// Energy distance of three knot designs on a clustered point cloud.

#include <iostream>

#include "lowrank_gp/lowrank_gp.hpp"

using namespace lowrank_gp;

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::stoull(argv[1]) : 1;
  const PointSet data = draw_locations(LocationLaw::Mixture, 5000, seed);
  const Eigen::Index k = 100;

  const KnotSet sp = support_points(data, k, seed);
  const KnotSet rand = random_knots(data, k, seed);
  const KnotSet grid = grid_knots(Box::unit(2), k);
  const EnergyReference ref(data);

  std::cout << "sp   " << *sp.energy_to_data << " (" << sp.sweeps << " sweeps)\n";
  std::cout << "rand " << *rand.energy_to_data << '\n';
  std::cout << "grid " << ref.energy_to(grid.points) << '\n';

  csv::write_knots(std::cout, sp, seed);
}
