#include "contestopt/coarse_ranking.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace contestopt {

namespace {

// pooled win kernel: 1/2 + delta/2 clamped to a probability; the clamped
// pair (s1 vs s2, s2 vs s1) always sums to one
double win_kernel(double delta) {
  return std::clamp(0.5 * (1.0 + delta), 0.0, 1.0);
}

// Solves the leave-one-out share equations
//   (1/(m-1)) sum_{j != i} c(R_i - R_j) = target_i
// for sorted scores R, pinning the mean (the rule is translation invariant).
// Returns the final max residual.
double calibrate_scores(Eigen::ArrayXd& score,
                        const Eigen::Ref<const Eigen::ArrayXd>& target) {
  const Eigen::Index m = score.size();
  const double opp = static_cast<double>(m - 1);
  std::vector<double> sorted(static_cast<std::size_t>(m));
  std::vector<double> prefix(static_cast<std::size_t>(m) + 1);

  Eigen::ArrayXd residual(m), diag(m);
  Eigen::ArrayXi win_lo(m), win_hi(m);
  const auto refresh = [&]() {
    for (Eigen::Index i = 0; i < m; ++i) sorted[static_cast<std::size_t>(i)] = score[i];
    prefix[0] = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i)
      prefix[i + 1] = prefix[i] + sorted[i];
    double worst = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto lo = std::lower_bound(sorted.begin(), sorted.end(), score[i] - 1.0) -
                      sorted.begin();
      const auto hi = std::lower_bound(sorted.begin(), sorted.end(), score[i] + 1.0) -
                      sorted.begin();
      win_lo[i] = static_cast<int>(lo);
      win_hi[i] = static_cast<int>(hi);
      const double inside = 0.5 * ((1.0 + score[i]) * static_cast<double>(hi - lo) -
                                   (prefix[hi] - prefix[lo]));
      residual[i] =
          (static_cast<double>(lo) + inside - 0.5) / opp - target[i];
      diag[i] = 0.5 * static_cast<double>(hi - lo - 1) / opp;
      worst = std::max(worst, std::abs(residual[i]));
    }
    return worst;
  };

  // Jacobian matvec: diag(a) x - windowed sums of x excluding self
  Eigen::ArrayXd xprefix(m + 1);
  const auto jmul = [&](const Eigen::ArrayXd& x) {
    xprefix[0] = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) xprefix[i + 1] = xprefix[i] + x[i];
    Eigen::ArrayXd y(m);
    for (Eigen::Index i = 0; i < m; ++i)
      y[i] = diag[i] * x[i] -
             0.5 / opp * (xprefix[win_hi[i]] - xprefix[win_lo[i]] - x[i]);
    return y;
  };

  double worst = refresh();
  for (int newton = 0; newton < 60 && worst > 1e-10; ++newton) {
    // CG in the mean-zero subspace; the Laplacian-plus-diagonal is PSD there
    Eigen::ArrayXd b = -residual;
    b -= b.mean();
    Eigen::ArrayXd x = Eigen::ArrayXd::Zero(m);
    Eigen::ArrayXd r = b, p = b;
    double rs = (r * r).sum();
    for (int it = 0; it < 400 && rs > 1e-24 * static_cast<double>(m); ++it) {
      Eigen::ArrayXd ap = jmul(p);
      ap -= ap.mean();
      const double denom = (p * ap).sum();
      if (!(denom > 0.0)) break;
      const double alpha = rs / denom;
      x += alpha * p;
      r -= alpha * ap;
      const double rs_new = (r * r).sum();
      p = r + (rs_new / rs) * p;
      rs = rs_new;
    }
    // damped update keeping the sorted invariant
    double step = 1.0;
    for (int back = 0; back < 8; ++back) {
      Eigen::ArrayXd trial = score + step * x;
      for (Eigen::Index i = 1; i < m; ++i)
        trial[i] = std::max(trial[i], trial[i - 1]);
      trial -= trial.mean();
      std::swap(score, trial);
      const double w = refresh();
      if (w < worst || step < 0.05) {
        worst = w;
        break;
      }
      std::swap(score, trial);  // revert
      step *= 0.5;
    }
  }
  return worst;
}

}  // namespace

CoarseRanking CoarseRanking::with_pools(
    std::vector<std::pair<double, double>> pools) {
  std::sort(pools.begin(), pools.end());
  for (std::size_t i = 0; i < pools.size(); ++i) {
    if (!(pools[i].first < pools[i].second))
      throw std::invalid_argument("pool intervals must be non-degenerate");
    if (i > 0 && pools[i].first < pools[i - 1].second)
      throw std::invalid_argument("pool intervals must be disjoint");
  }
  CoarseRanking r;
  r.pools = std::move(pools);
  return r;
}

CoarseRanking CoarseRanking::from_regions(const RegionPartition& regions,
                                          const DistributionSpec& spec) {
  std::vector<std::pair<double, double>> pools;
  for (const auto& iv : regions.intervals)
    if (iv.tag == RegionTag::NoEffort && spec.cdf(iv.hi) > spec.cdf(iv.lo))
      pools.emplace_back(iv.lo, iv.hi);
  return with_pools(std::move(pools));
}

double CoarseRanking::ceiling(double s) const {
  for (const auto& [lo, hi] : pools) {
    if (s <= lo) break;  // pools sorted; endpoints count as outside
    if (s < hi) return hi;
  }
  return s;
}

CoarseRankResult coarse_rank(const CoarseRanking& ranking,
                             const Eigen::Ref<const Eigen::ArrayXd>& signals) {
  const Eigen::Index n = signals.size();
  std::vector<double> ceil(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (signals[i] < 0.0) throw std::invalid_argument("signals must be non-negative");
    ceil[static_cast<std::size_t>(i)] = ranking.ceiling(signals[i]);
  }
  CoarseRankResult out;
  out.rank.assign(static_cast<std::size_t>(n), 0);
  out.ties.assign(static_cast<std::size_t>(n), 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      if (signals[j] > ceil[static_cast<std::size_t>(i)])
        ++out.rank[static_cast<std::size_t>(i)];
      if (ceil[static_cast<std::size_t>(j)] == ceil[static_cast<std::size_t>(i)])
        ++out.ties[static_cast<std::size_t>(i)];
    }
  }
  return out;
}

Eigen::ArrayXd contest_allocate(const CoarseRanking& ranking,
                                const Eigen::Ref<const Eigen::ArrayXd>& signals,
                                int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  const CoarseRankResult rk = coarse_rank(ranking, signals);
  Eigen::ArrayXd x(signals.size());
  for (Eigen::Index i = 0; i < signals.size(); ++i) {
    const int r = rk.rank[static_cast<std::size_t>(i)];
    const int z = rk.ties[static_cast<std::size_t>(i)];
    if (k >= r + z) {
      x[i] = 1.0;
    } else if (k > r) {
      x[i] = static_cast<double>(k - r) / z;
    } else {
      x[i] = 0.0;
    }
  }
  return x;
}

PairContestRule::PairContestRule(const DistributionSpec& spec,
                                 std::vector<Pool> pools)
    : spec_(&spec), pools_(std::move(pools)) {}

PairContestRule PairContestRule::build(const MechanismPair& pair,
                                       const DistributionSpec& spec,
                                       Eigen::Index nodes_per_pool) {
  return build(pair, spec, classify_regions(pair, spec), nodes_per_pool);
}

PairContestRule PairContestRule::build(const MechanismPair& pair,
                                       const DistributionSpec& spec,
                                       const RegionPartition& regions,
                                       Eigen::Index nodes_per_pool) {
  if (pair.n != 2 || pair.k != 1)
    throw std::invalid_argument("pair contest rule requires n = 2, k = 1");
  const CoarseRanking ranking = CoarseRanking::from_regions(regions, spec);

  auto interp_q = [&](double s) {
    const auto& th = pair.grid.points;
    const Eigen::Index m = th.size();
    if (s <= th[0]) return pair.Q[0];
    if (s >= th[m - 1]) return pair.Q[m - 1];
    const Eigen::Index j = std::min<Eigen::Index>(
        m - 2, static_cast<Eigen::Index>((s - th[0]) / (th[1] - th[0])));
    const double w = (s - th[j]) / (th[j + 1] - th[j]);
    return (1.0 - w) * pair.Q[j] + w * pair.Q[j + 1];
  };

  std::vector<Pool> pools;
  for (const auto& [a, b] : ranking.pools) {
    Pool pool;
    pool.lo = a;
    pool.hi = b;
    pool.mass = spec.cdf(b) - spec.cdf(a);
    const double q_span = interp_q(b) - interp_q(a);
    if (q_span > pool.mass + 1e-9)
      throw std::runtime_error(
          "pool allocation span exceeds its mass; no pooled rule can match it");

    const Eigen::Index m = nodes_per_pool;
    pool.v = (Eigen::ArrayXd::LinSpaced(m, 0, static_cast<double>(m - 1)) + 0.5) /
             static_cast<double>(m);
    Eigen::ArrayXd target(m);
    const double fa = spec.cdf(a);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double s = spec.quantile(fa + pool.mass * pool.v[i]);
      // interim consistency: Q(s) = F(a) + mass * (share within the pool)
      target[i] = (interp_q(s) - fa) / pool.mass;
    }
    // full allocation within the pool forces a mean share of 1/2; re-center
    // so boundary snapping cannot make the targets unreachable
    target -= target.mean() - 0.5;
    target = target.min(1.0 - 1e-12).max(1e-12);

    // affine start (exact when its span stays within the kernel window),
    // then Newton on the share equations. Scores stay sorted, so the
    // Jacobian is an interval-graph Laplacian plus diagonal and its matvec
    // runs on prefix sums; conjugate gradients solve each step in the
    // mean-zero subspace (the rule is translation invariant).
    pool.score = 2.0 * (target - target.mean());
    for (Eigen::Index i = 1; i < m; ++i)
      pool.score[i] = std::max(pool.score[i], pool.score[i - 1]);
    pool.calibration_residual = calibrate_scores(pool.score, target);
    pools.push_back(std::move(pool));
  }
  return PairContestRule(spec, std::move(pools));
}

int PairContestRule::pool_index(double s) const {
  for (std::size_t p = 0; p < pools_.size(); ++p) {
    if (s <= pools_[p].lo) break;
    if (s < pools_[p].hi) return static_cast<int>(p);
  }
  return -1;
}

double PairContestRule::score_at(int pool, double s) const {
  const Pool& P = pools_[static_cast<std::size_t>(pool)];
  const double v =
      (spec_->cdf(s) - spec_->cdf(P.lo)) / std::max(P.mass, 1e-300);
  const Eigen::Index m = P.v.size();
  const double pos = v * static_cast<double>(m) - 0.5;
  if (pos <= 0.0) return P.score[0];
  if (pos >= static_cast<double>(m - 1)) return P.score[m - 1];
  const Eigen::Index j = static_cast<Eigen::Index>(pos);
  const double w = pos - static_cast<double>(j);
  return (1.0 - w) * P.score[j] + w * P.score[j + 1];
}

double PairContestRule::win_probability(double s1, double s2) const {
  const int p1 = pool_index(s1);
  const int p2 = pool_index(s2);
  if (p1 >= 0 && p1 == p2)
    return win_kernel(score_at(p1, s1) - score_at(p1, s2));
  if (s1 > s2) return 1.0;
  if (s1 < s2) return 0.0;
  return 0.5;
}

double PairContestRule::worst_calibration_residual() const {
  double r = 0.0;
  for (const auto& p : pools_) r = std::max(r, p.calibration_residual);
  return r;
}

}  // namespace contestopt
