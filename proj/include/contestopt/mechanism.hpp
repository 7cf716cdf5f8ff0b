#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "contestopt/distribution.hpp"

namespace contestopt {

// Interim allocation/utility curves on a shared grid, with the environment
// they live in (n agents, k items, marginal effort cost eta, welfare
// weight alpha).
struct MechanismPair {
  TypeGrid grid;
  Eigen::ArrayXd Q;
  Eigen::ArrayXd U;
  double eta = 1.0;
  int n = 2;
  int k = 1;
  double alpha = 0.5;
};

// Default tolerances: slopes divide by the cell width and amplify grid error,
// so they get a looser budget than level comparisons.
inline double default_level_tol(double eta) { return 1e-6 * std::max(1.0, eta); }
inline double default_slope_tol(double eta) { return 1e-3 * std::max(1.0, eta); }

// Utility-maximal incentive-compatible utility for a monotone allocation Q
// and lowest-type utility u_low: the running minimum of Q lifted along
// slope-eta lines. Single left-to-right sweep, exact on the grid.
Eigen::ArrayXd canonical_utility(const Eigen::Ref<const Eigen::ArrayXd>& points,
                                 const Eigen::Ref<const Eigen::ArrayXd>& Q,
                                 double eta, double u_low);

struct IcReport {
  bool pass = false;
  double worst_slope_low = 0.0;   // violation of slope >= 0
  double worst_slope_high = 0.0;  // violation of slope <= eta
  double worst_level = 0.0;       // violation of U <= Q
  double worst_binding = 0.0;     // violation of slope == eta where U < Q
};

// Checks the contest incentive conditions: utility slope in [0, eta],
// U <= Q, and slope pinned to eta wherever the level constraint is slack.
IcReport check_ic(const MechanismPair& pair, double level_tol = -1.0,
                  double slope_tol = -1.0);

struct FeasibilityReport {
  bool pass = false;
  double worst_slack = 0.0;  // max over grid of tail(Q) - tail(Q_E)
  double worst_theta = 0.0;
};

// Symmetric interim feasibility: tail sums of Q against the grid weights
// never exceed tail sums of the efficient allocation. Requires monotone Q;
// non-monotone input is rejected (rearrange first).
FeasibilityReport check_interim_feasibility(
    const Eigen::Ref<const Eigen::ArrayXd>& Q, const TypeGrid& grid,
    const DistributionSpec& spec, int n, int k, double tol = 1e-9);

// Monotone rearrangement: the quantile function of the value distribution of
// Q under the grid measure, read back at each grid point's own mass
// coordinate. Fixes monotone inputs exactly.
Eigen::ArrayXd monotone_rearrangement(const Eigen::Ref<const Eigen::ArrayXd>& Q,
                                      const TypeGrid& grid);

enum class RegionTag { NoTension, NoEffort, Efficient };

std::string region_tag_name(RegionTag tag);

struct RegionPartition {
  struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    RegionTag tag = RegionTag::NoTension;
  };
  std::vector<Interval> intervals;
};

struct ClassifyTolerances {
  double level = -1.0;           // defaults to default_level_tol(eta)
  double slope = -1.0;           // defaults to default_slope_tol(eta)
  double binding = 1e-5;         // no-effort interval integral residual
  Eigen::Index min_run_cells = 3;  // shorter runs merge into the left interval
};

// Partition of the type space into no-tension / no-effort / efficient
// intervals. Cells where Q = U = Q_E are no-tension; Q = U away from Q_E is
// no-effort (slope eta, interval integral binding); U < Q is efficient.
// Cutoff cells attach to the interval on their left. Throws on cells that
// fit no tag and when more than 64 intervals are detected.
RegionPartition classify_regions(const MechanismPair& pair,
                                 const DistributionSpec& spec,
                                 ClassifyTolerances tols = {});

// F-measure of intervals carrying a given tag.
double region_measure(const RegionPartition& regions,
                      const DistributionSpec& spec, RegionTag tag);

// Equilibrium signal recommendation s(theta) = theta + (Q - U) / eta.
// Requires the pair to pass check_ic.
Eigen::ArrayXd equilibrium_signal_map(const MechanismPair& pair);

}  // namespace contestopt
