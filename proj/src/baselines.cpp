#include "contestopt/baselines.hpp"

#include <cmath>
#include <stdexcept>

#include "contestopt/quadrature.hpp"

namespace contestopt {

MechanismPair wta_pair(const DistributionSpec& spec, const TypeGrid& grid,
                       int n, int k, double eta, double alpha) {
  MechanismPair pair;
  pair.grid = grid;
  pair.n = n;
  pair.k = k;
  pair.eta = eta;
  pair.alpha = alpha;
  pair.Q = efficient_allocation_curve(spec, n, k, grid.points);
  pair.U = canonical_utility(grid.points, pair.Q, eta, pair.Q[0]);
  return pair;
}

double vcg_interim_utility(const DistributionSpec& spec, int n, int k,
                           double eta, double theta) {
  if (!(k > 0 && k < n)) throw std::invalid_argument("need 0 < k < n");
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
  const double lo = std::max(spec.lower(), theta - 1.0 / eta);
  if (lo >= theta) return 0.0;
  return eta * integrate(
                   [&](double t) { return efficient_allocation(spec, n, k, t); },
                   lo, theta, 1e-13);
}

DeltaBound nonconvergence_bound(double theta_upper, double alpha, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("alpha must lie in (0, 1)");
  DeltaBound out;
  out.delta = ((theta_upper - eps) * alpha + 1.0 - alpha) /
              (theta_upper * alpha +
               (1.0 - alpha) * (1.0 - 1.0 / std::exp(1.0) + eps));
  out.binding = out.delta > 1.0;
  return out;
}

double efficient_utility_total(const DistributionSpec& spec, int n, double eta,
                               Eigen::Index cells) {
  const TypeGrid grid = make_type_grid(spec, cells);
  const MechanismPair pair = wta_pair(spec, grid, n, 1, eta);
  return n * (grid.weights * pair.U).sum();
}

}  // namespace contestopt
