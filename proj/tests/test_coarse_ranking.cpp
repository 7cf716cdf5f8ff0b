#include <doctest.h>

#include <cmath>
#include <random>

#include "contestopt/coarse_ranking.hpp"
#include "contestopt/quadrature.hpp"
#include "contestopt/rng.hpp"
#include "contestopt/solver.hpp"

using namespace contestopt;

namespace {

Eigen::ArrayXd signals(std::initializer_list<double> v) {
  Eigen::ArrayXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double s : v) out[i++] = s;
  return out;
}

}  // namespace

TEST_CASE("coarse rank") {
  SUBCASE("strict ranking") {
    const auto rk = coarse_rank(CoarseRanking::strict(), signals({0.9, 0.5, 0.1}));
    CHECK(rk.rank == std::vector<int>{0, 1, 2});
    CHECK(rk.ties == std::vector<int>{1, 1, 1});
  }

  SUBCASE("pool ties its members") {
    const auto ranking = CoarseRanking::with_pools({{0.4, 0.95}});
    const auto rk = coarse_rank(ranking, signals({0.9, 0.5, 0.1}));
    CHECK(rk.rank == std::vector<int>{0, 0, 2});
    CHECK(rk.ties == std::vector<int>{2, 2, 1});
  }

  SUBCASE("signals outside the pool rank alone") {
    const auto ranking = CoarseRanking::with_pools({{0.4, 0.95}});
    const auto rk = coarse_rank(ranking, signals({0.99, 0.5, 0.45}));
    CHECK(rk.rank == std::vector<int>{0, 1, 1});
    CHECK(rk.ties == std::vector<int>{1, 2, 2});
  }

  SUBCASE("pool validation") {
    CHECK_THROWS_AS(CoarseRanking::with_pools({{0.5, 0.5}}), std::invalid_argument);
    CHECK_THROWS_AS(CoarseRanking::with_pools({{0.1, 0.5}, {0.4, 0.8}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(coarse_rank(CoarseRanking::strict(), signals({-0.1, 0.5})),
                    std::invalid_argument);
  }
}

TEST_CASE("contest allocation") {
  SUBCASE("winner takes all under a strict ranking") {
    const Eigen::ArrayXd x =
        contest_allocate(CoarseRanking::strict(), signals({0.9, 0.5, 0.1}), 1);
    CHECK(x[0] == 1.0);
    CHECK(x[1] == 0.0);
    CHECK(x[2] == 0.0);
  }

  SUBCASE("a pooled tie splits the item") {
    const auto ranking = CoarseRanking::with_pools({{0.4, 0.95}});
    const Eigen::ArrayXd x = contest_allocate(ranking, signals({0.9, 0.5, 0.1}), 1);
    CHECK(x[0] == 0.5);
    CHECK(x[1] == 0.5);
    CHECK(x[2] == 0.0);
  }

  SUBCASE("two items cover the pooled pair") {
    const auto ranking = CoarseRanking::with_pools({{0.4, 0.95}});
    const Eigen::ArrayXd x = contest_allocate(ranking, signals({0.9, 0.5, 0.1}), 2);
    CHECK(x[0] == 1.0);
    CHECK(x[1] == 1.0);
    CHECK(x[2] == 0.0);
  }

  SUBCASE("conservation battery") {
    auto rng = make_rng(5);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 400; ++trial) {
      const int n = 2 + static_cast<int>(unif(rng) * 6);
      const int k = 1 + static_cast<int>(unif(rng) * (n - 1));
      std::vector<std::pair<double, double>> pools;
      double lo = 0.0;
      while (unif(rng) < 0.6 && lo < 0.8) {
        const double a = lo + 0.02 + 0.2 * unif(rng);
        const double b = a + 0.02 + 0.2 * unif(rng);
        if (b >= 1.0) break;
        pools.emplace_back(a, b);
        lo = b;
      }
      const auto ranking = CoarseRanking::with_pools(pools);
      Eigen::ArrayXd s(n);
      for (int i = 0; i < n; ++i) s[i] = unif(rng);
      const Eigen::ArrayXd x = contest_allocate(ranking, s, k);
      CHECK((x >= 0).all());
      CHECK((x <= 1).all());
      CHECK(x.sum() <= k + 1e-12);
      // items are never withheld when enough contenders are present
      if (n >= k) CHECK(x.sum() == doctest::Approx(k).epsilon(1e-12));
    }
  }

  SUBCASE("permutation equivariance") {
    const auto ranking = CoarseRanking::with_pools({{0.2, 0.5}});
    const Eigen::ArrayXd s = signals({0.45, 0.7, 0.3, 0.9});
    const Eigen::ArrayXd x = contest_allocate(ranking, s, 2);
    const Eigen::ArrayXd s2 = signals({0.9, 0.3, 0.7, 0.45});
    const Eigen::ArrayXd x2 = contest_allocate(ranking, s2, 2);
    CHECK(x[0] == x2[3]);
    CHECK(x[1] == x2[2]);
    CHECK(x[2] == x2[1]);
    CHECK(x[3] == x2[0]);
  }
}

TEST_CASE("ex-post rule for two agents") {
  const auto spec = DistributionSpec::power(2, 0, 1);

  SUBCASE("no pools reduces to winner takes all") {
    MechanismPair pair;
    pair.grid = make_type_grid(spec, 200);
    pair.Q = spec.cdf(pair.grid.points);
    pair.U = pair.Q;
    pair.eta = 2.5;  // slope cap above the steepest efficient slope
    RegionPartition regions;
    regions.intervals.push_back({0.0, 1.0, RegionTag::NoTension});
    const PairContestRule rule = PairContestRule::build(pair, spec, regions);
    CHECK(rule.pools().empty());
    CHECK(rule.win_probability(0.7, 0.2) == 1.0);
    CHECK(rule.win_probability(0.2, 0.7) == 0.0);
    CHECK(rule.win_probability(0.4, 0.4) == 0.5);
  }

  SUBCASE("optimal pool reproduces the solver allocation") {
    SolveConfig cfg;
    cfg.spec = spec;
    cfg.alpha = 0.5;
    const SolveResult res = solve(cfg);
    const PairContestRule rule = PairContestRule::build(res.pair, spec, res.regions);
    REQUIRE(rule.pools().size() == 1);
    CHECK(rule.worst_calibration_residual() < 1e-8);

    const double a = rule.pools()[0].lo;
    const double b = rule.pools()[0].hi;
    const double mid = 0.5 * (a + b);
    // equal pooled signals split the item
    CHECK(rule.win_probability(mid, mid) == doctest::Approx(0.5).epsilon(1e-12));
    // full-allocation identity inside the pool
    for (double s2 : {0.3, 0.6, 0.9}) {
      CHECK(rule.win_probability(mid, s2) + rule.win_probability(s2, mid) ==
            doctest::Approx(1.0).epsilon(1e-12));
    }

    // quadrature of the rule against the opponent type distribution
    // recovers the interim allocation (zero effort inside the pool)
    auto interim = [&](double t1) {
      return integrate(
          [&](double t) { return rule.win_probability(t1, t) * spec.pdf(t); }, 0.0,
          1.0, 1e-11);
    };
    auto pair_q = [&](double t) {
      const auto& th = res.pair.grid.points;
      const Eigen::Index j = std::min<Eigen::Index>(
          th.size() - 2, static_cast<Eigen::Index>(t * (th.size() - 1)));
      const double w = (t - th[j]) / (th[j + 1] - th[j]);
      return (1 - w) * res.pair.Q[j] + w * res.pair.Q[j + 1];
    };
    CHECK(std::abs(interim(mid) - pair_q(mid)) < 1e-4);
    for (double t1 : {0.3, 0.5, 0.7, 0.9}) {
      CHECK(std::abs(interim(t1) - pair_q(t1)) < 5e-4);
    }
  }

  SUBCASE("pool span above its mass is rejected") {
    MechanismPair pair;
    pair.grid = make_type_grid(spec, 400);
    pair.eta = 1.0;
    // allocation climbing faster than F across the pool
    pair.Q = spec.cdf(pair.grid.points).min(0.2) +
             (spec.cdf(pair.grid.points) - 0.2).max(0.0) * 1.8;
    pair.Q = pair.Q.min(1.0);
    pair.U = pair.Q;
    RegionPartition regions;
    regions.intervals.push_back({0.0, 0.4, RegionTag::NoTension});
    regions.intervals.push_back({0.4, 0.9, RegionTag::NoEffort});
    regions.intervals.push_back({0.9, 1.0, RegionTag::NoTension});
    CHECK_THROWS_WITH_AS(PairContestRule::build(pair, spec, regions),
                         doctest::Contains("span"), std::runtime_error);
  }
}
