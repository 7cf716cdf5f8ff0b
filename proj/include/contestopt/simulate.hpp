#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>

#include "contestopt/coarse_ranking.hpp"
#include "contestopt/distribution.hpp"
#include "contestopt/mechanism.hpp"

namespace contestopt {

struct McConfig {
  Eigen::Index samples = 100000;
  std::uint64_t seed = 1;
  int probe_count = 33;              // quantile-spaced probe types
  Eigen::Index deviation_signals = 201;  // deviation grid over [0, upper + 1/eta]
};

// Monotone signal strategy sampled on a grid, evaluated by interpolation.
struct SignalStrategy {
  Eigen::ArrayXd theta;
  Eigen::ArrayXd s;

  double operator()(double t) const;

  static SignalStrategy identity(const DistributionSpec& spec);
  static SignalStrategy from_pair(const MechanismPair& pair);
};

Eigen::ArrayXd probe_types(const DistributionSpec& spec, int count);

struct InterimEstimate {
  Eigen::ArrayXd theta;
  Eigen::ArrayXd q_hat, q_se;
  Eigen::ArrayXd u_hat, u_se;
};

// Expected own allocation given own signal and opponent signals.
using AllocationFn =
    std::function<double(double, const Eigen::Ref<const Eigen::ArrayXd>&)>;

// Estimates the interim allocation and utility of a rule under a strategy by
// sampling opponent profiles; per-probe sample blocks draw independent
// seeds from the master seed.
InterimEstimate mc_interim_estimate(const AllocationFn& rule, int n,
                                    const SignalStrategy& strategy,
                                    const DistributionSpec& spec, double eta,
                                    const McConfig& cfg);
InterimEstimate mc_interim_estimate(const PairContestRule& rule,
                                    const SignalStrategy& strategy,
                                    const DistributionSpec& spec, double eta,
                                    const McConfig& cfg);
InterimEstimate mc_interim_estimate(const CoarseRanking& ranking, int n, int k,
                                    const SignalStrategy& strategy,
                                    const DistributionSpec& spec, double eta,
                                    const McConfig& cfg);

struct DeviationReport {
  double max_gain = 0.0;
  double se_at_max = 0.0;
  double probe_theta = 0.0;
  double probe_signal = 0.0;
  bool certified = false;  // every probe's best deviation within 3 SE + 1e-3
};

// Scans a (type, deviant signal) grid for profitable one-shot deviations
// against the equilibrium payoff, using common opponent draws per probe row
// so the comparison noise cancels.
DeviationReport deviation_scan(const AllocationFn& rule, int n,
                               const SignalStrategy& strategy,
                               const DistributionSpec& spec, double eta,
                               const McConfig& cfg);

// Sorted-sample fast path for the two-agent rule.
DeviationReport deviation_scan(const PairContestRule& rule,
                               const SignalStrategy& strategy,
                               const DistributionSpec& spec, double eta,
                               const McConfig& cfg);

// Empirical interim utility of the VCG-format mechanism under truthful
// reports: top-k reporters must produce 1/eta above the highest losing
// report or opt out.
InterimEstimate simulate_vcg(const DistributionSpec& spec, int n, int k,
                             double eta, const McConfig& cfg);

}  // namespace contestopt
