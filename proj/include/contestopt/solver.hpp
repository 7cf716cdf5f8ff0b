#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "contestopt/distribution.hpp"
#include "contestopt/mechanism.hpp"

namespace contestopt {

enum class SolveMethod { Lp, ConvexClosedForm, Auto };

struct SolveConfig {
  DistributionSpec spec = DistributionSpec::uniform(0.0, 1.0);
  int n = 2;
  int k = 1;
  double eta = 1.0;
  double alpha = 0.5;
  Eigen::Index grid_cells = 2000;
  SolveMethod method = SolveMethod::Auto;
  double lp_tol = 1e-8;
  // scales the majorization right-hand side; values below 1 tighten the
  // feasible set (the objective is then non-increasing in the scale)
  double tail_scale = 1.0;
};

struct SolveDiagnostics {
  std::string method;
  // convex-case cutoffs: no-tension ends at theta1, no-effort at theta2
  double theta1 = std::numeric_limits<double>::quiet_NaN();
  double theta2 = std::numeric_limits<double>::quiet_NaN();
  double binding_residual = 0.0;  // pool integral residual at the cutoffs
  double objective_exact = std::numeric_limits<double>::quiet_NaN();
  int lp_iterations = 0;
  double lp_gap = 0.0;
  double feasibility_slack = 0.0;
};

struct SolveResult {
  MechanismPair pair;
  double objective = 0.0;
  RegionPartition regions;
  SolveDiagnostics diagnostics;
};

// Per-agent welfare E[alpha * theta * Q + (1 - alpha) * U] under the grid
// weights; total welfare is n times this.
double objective_value(const MechanismPair& pair);

// Second differences of the efficient allocation on the grid stay above
// -1e-8.
bool efficient_allocation_is_convex(const DistributionSpec& spec, int n, int k,
                                    Eigen::Index cells);

SolveResult solve(const SolveConfig& config);

// Discretized optimal contest via linear programming: maximize the welfare
// objective over monotone Q with tail-sum majorization bounds and the
// slope/level utility constraints.
SolveResult solve_lp(const SolveConfig& config);

// Closed-form three-interval solver for convex efficient allocations (k=1):
// no-tension up to theta1, a slope-eta pooled segment with binding integral
// up to theta2, efficient above. theta1 is found by golden-section search on
// the exact objective, theta2 by bisection on the binding integral.
SolveResult solve_convex_closed_form(const SolveConfig& config);

struct ParetoPoint {
  double alpha = 0.0;
  double efficiency = 0.0;  // E[theta Q]
  double utility = 0.0;     // E[U]
};

std::vector<ParetoPoint> pareto_sweep(const SolveConfig& config,
                                      const std::vector<double>& alphas);

// Same economy with z-fold replicated agents and items.
SolveConfig replicate_economy(const SolveConfig& config, int z);

// Cutoff type with Pr[theta >= theta_c] = k/n.
double cutoff_type(const DistributionSpec& spec, int n, int k);

}  // namespace contestopt
