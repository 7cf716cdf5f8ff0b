#pragma once

#include <Eigen/Core>

#include <vector>

#include "contestopt/distribution.hpp"
#include "contestopt/mechanism.hpp"

namespace contestopt {

// Disjoint open pooling intervals in signal space; signals inside a pool
// share a rank. An empty pool set is a strict ranking.
struct CoarseRanking {
  std::vector<std::pair<double, double>> pools;

  static CoarseRanking strict() { return {}; }
  static CoarseRanking with_pools(std::vector<std::pair<double, double>> pools);

  // Pools taken from the no-effort intervals of a region partition
  // (equilibrium signals equal types there); zero-mass intervals dropped.
  static CoarseRanking from_regions(const RegionPartition& regions,
                                    const DistributionSpec& spec);

  // Upper endpoint of the pool containing s, or s itself outside all pools.
  double ceiling(double s) const;
};

struct CoarseRankResult {
  std::vector<int> rank;  // opponents ranked strictly above
  std::vector<int> ties;  // agents sharing the rank, self included
};

CoarseRankResult coarse_rank(const CoarseRanking& ranking,
                             const Eigen::Ref<const Eigen::ArrayXd>& signals);

// Allocation of k items by coarse rank: full share above the cutoff rank,
// (k - rank)/ties at it, nothing below.
Eigen::ArrayXd contest_allocate(const CoarseRanking& ranking,
                                const Eigen::Ref<const Eigen::ArrayXd>& signals,
                                int k);

// Ex-post contest rule for two agents and one item that reproduces a given
// interim allocation. Outside pools the higher signal wins. Inside a pool the
// win probability is clamp(1/2 + (g(s1) - g(s2))/2, 0, 1) with handicap
// scores g calibrated so that each pooled signal's expected share against the
// pool's conditional signal distribution matches the target allocation; the
// clamp keeps the rule a full-allocation contest rule when the affine score
// span exceeds one.
class PairContestRule {
 public:
  struct Pool {
    double lo = 0.0;
    double hi = 0.0;
    double mass = 0.0;             // F(hi) - F(lo)
    Eigen::ArrayXd v;              // conditional-quantile nodes in (0, 1)
    Eigen::ArrayXd score;          // calibrated handicap at the nodes
    double calibration_residual = 0.0;
  };

  static PairContestRule build(const MechanismPair& pair,
                               const DistributionSpec& spec,
                               const RegionPartition& regions,
                               Eigen::Index nodes_per_pool = 4096);
  static PairContestRule build(const MechanismPair& pair,
                               const DistributionSpec& spec,
                               Eigen::Index nodes_per_pool = 4096);

  // Probability that the first signal wins the item.
  double win_probability(double s1, double s2) const;

  // Pool index containing s, or -1.
  int pool_index(double s) const;
  double score_at(int pool, double s) const;
  const std::vector<Pool>& pools() const { return pools_; }
  double worst_calibration_residual() const;

 private:
  PairContestRule(const DistributionSpec& spec, std::vector<Pool> pools);

  const DistributionSpec* spec_ = nullptr;
  std::vector<Pool> pools_;
};

}  // namespace contestopt
