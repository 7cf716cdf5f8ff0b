#pragma once

#include "contestopt/distribution.hpp"
#include "contestopt/mechanism.hpp"

namespace contestopt {

enum class BaselineKind { Wta, VcgFormat };

// Winner-takes-all contest: efficient allocation with the utility-maximal
// incentive-compatible utility (zero effort for the lowest type).
MechanismPair wta_pair(const DistributionSpec& spec, const TypeGrid& grid,
                       int n, int k, double eta, double alpha = 0.5);

// Interim utility of the VCG-format mechanism: winners must hit the
// threshold signal 1/eta above the highest losing report, so
// U(theta) = eta * integral of the efficient allocation over
// [theta - 1/eta, theta] (zero below the support).
double vcg_interim_utility(const DistributionSpec& spec, int n, int k,
                           double eta, double theta);

struct DeltaBound {
  double delta = 0.0;
  bool binding = false;  // delta > 1, i.e. epsilon small enough to bite
};

// Lower bound on the optimal-vs-WTA payoff ratio for large single-item
// contests: ((ub - eps) a + 1 - a) / (ub a + (1 - a)(1 - 1/e + eps)).
DeltaBound nonconvergence_bound(double theta_upper, double alpha, double eps);

// n * E[U] under the WTA contest with one item.
double efficient_utility_total(const DistributionSpec& spec, int n, double eta,
                               Eigen::Index cells = 2000);

}  // namespace contestopt
