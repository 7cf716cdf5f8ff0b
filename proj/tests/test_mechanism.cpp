#include <doctest.h>

#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <random>

#include "contestopt/baselines.hpp"
#include "contestopt/mechanism.hpp"
#include "contestopt/rng.hpp"

using namespace contestopt;

namespace {

const DistributionSpec kUniform = DistributionSpec::uniform(0, 1);

MechanismPair make_pair(const DistributionSpec& spec, Eigen::Index cells,
                        const std::function<double(double)>& q,
                        const std::function<double(double)>& u, double eta = 1.0,
                        int n = 2, int k = 1) {
  MechanismPair pair;
  pair.grid = make_type_grid(spec, cells);
  pair.Q = pair.grid.points.unaryExpr(q);
  pair.U = pair.grid.points.unaryExpr(u);
  pair.eta = eta;
  pair.n = n;
  pair.k = k;
  return pair;
}

// O(m^2) oracle for the utility-maximal incentive-compatible utility:
// min over the lowest-type line and all lifted allocation values.
Eigen::ArrayXd canonical_oracle(const Eigen::ArrayXd& th, const Eigen::ArrayXd& Q,
                                double eta, double u_low) {
  Eigen::ArrayXd out(th.size());
  for (Eigen::Index j = 0; j < th.size(); ++j) {
    double best = u_low + eta * (th[j] - th[0]);
    for (Eigen::Index l = 0; l <= j; ++l)
      best = std::min(best, Q[l] + eta * (th[j] - th[l]));
    out[j] = best;
  }
  return out;
}

Eigen::ArrayXd random_monotone_curve(std::mt19937_64& rng, Eigen::Index m) {
  Eigen::ArrayXd q(m);
  std::uniform_real_distribution<double> jump(0.0, 1.0);
  double acc = 0.2 * jump(rng);
  for (Eigen::Index j = 0; j < m; ++j) {
    if (jump(rng) < 0.05) acc += 0.2 * jump(rng);
    acc += 0.002 * jump(rng);
    q[j] = std::min(acc, 1.0);
  }
  return q;
}

}  // namespace

TEST_CASE("canonical utility") {
  SUBCASE("uniform winner-takes-all needs no effort") {
    const TypeGrid g = make_type_grid(kUniform, 400);
    const Eigen::ArrayXd u = canonical_utility(g.points, g.points, 1.0, 0.0);
    CHECK((u - g.points).abs().maxCoeff() < 1e-12);
  }

  SUBCASE("square allocation bends at one half") {
    const TypeGrid g = make_type_grid(kUniform, 400);
    const Eigen::ArrayXd q = g.points.square();
    const Eigen::ArrayXd u = canonical_utility(g.points, q, 1.0, 0.0);
    for (Eigen::Index j = 0; j < g.size(); ++j) {
      const double t = g.points[j];
      const double expect = t <= 0.5 ? t * t : t - 0.25;
      CHECK(u[j] == doctest::Approx(expect).epsilon(1e-9));
    }
  }

  SUBCASE("flat allocation carries through") {
    const TypeGrid g = make_type_grid(kUniform, 100);
    const Eigen::ArrayXd q = Eigen::ArrayXd::Constant(g.size(), 0.37);
    const Eigen::ArrayXd u = canonical_utility(g.points, q, 2.0, 0.37);
    CHECK((u - 0.37).abs().maxCoeff() == 0.0);
  }

  SUBCASE("precondition errors") {
    const TypeGrid g = make_type_grid(kUniform, 100);
    Eigen::ArrayXd bad = g.points;
    bad[50] = 0.1;
    CHECK_THROWS_AS(canonical_utility(g.points, bad, 1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(canonical_utility(g.points, g.points, 1.0, 0.5),
                    std::invalid_argument);
  }

  SUBCASE("sweep equals the quadratic-time oracle") {
    auto rng = make_rng(7);
    const TypeGrid g = make_type_grid(kUniform, 257);
    for (int trial = 0; trial < 100; ++trial) {
      const Eigen::ArrayXd q = random_monotone_curve(rng, g.size());
      const double eta = 0.5 + 2.0 * (trial % 5) / 4.0;
      const double u_low = q[0] * (trial % 3) / 2.0;
      const Eigen::ArrayXd fast = canonical_utility(g.points, q, eta, u_low);
      const Eigen::ArrayXd slow = canonical_oracle(g.points, q, eta, u_low);
      CHECK((fast - slow).abs().maxCoeff() < 1e-12);
    }
  }

  SUBCASE("pointwise maximum among feasible utilities") {
    auto rng = make_rng(8);
    const TypeGrid g = make_type_grid(DistributionSpec::power(2, 0, 1), 200);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
      const Eigen::ArrayXd q = random_monotone_curve(rng, g.size());
      const double eta = 0.5 + unif(rng);
      const Eigen::ArrayXd u_star = canonical_utility(g.points, q, eta, q[0]);
      for (int cand = 0; cand < 50; ++cand) {
        // random curve with slopes in [0, eta], capped by Q, same start
        Eigen::ArrayXd u(g.size());
        u[0] = std::min(q[0], u_star[0]);
        for (Eigen::Index j = 1; j < g.size(); ++j) {
          const double slope = eta * unif(rng);
          u[j] = std::min(u[j - 1] + slope * (g.points[j] - g.points[j - 1]), q[j]);
        }
        CHECK((u <= u_star + 1e-9).all());
      }
    }
  }
}

TEST_CASE("incentive check") {
  SUBCASE("winner-takes-all equilibrium passes") {
    const auto pair = make_pair(kUniform, 400, [](double t) { return t; },
                                [](double t) { return t; });
    CHECK(check_ic(pair).pass);
  }

  SUBCASE("square utility breaks the slope cap above one half") {
    const auto pair = make_pair(kUniform, 400, [](double t) { return t * t; },
                                [](double t) { return t * t; });
    const IcReport rep = check_ic(pair);
    CHECK(!rep.pass);
    CHECK(rep.worst_slope_high > 0.5);  // slope 2 theta approaches 2
  }

  SUBCASE("null mechanism passes") {
    const auto pair = make_pair(kUniform, 100, [](double) { return 0.0; },
                                [](double) { return 0.0; });
    CHECK(check_ic(pair).pass);
  }

  SUBCASE("slack level without eta slope fails the binding condition") {
    const auto pair = make_pair(kUniform, 400, [](double t) { return t; },
                                [](double t) { return 0.5 * t; });
    const IcReport rep = check_ic(pair);
    CHECK(!rep.pass);
    CHECK(rep.worst_binding == doctest::Approx(0.5).epsilon(1e-6));
  }
}

TEST_CASE("interim feasibility") {
  const TypeGrid g = make_type_grid(kUniform, 1000);
  const Eigen::ArrayXd qe = efficient_allocation_curve(kUniform, 2, 1, g.points);

  SUBCASE("the efficient rule binds with zero slack") {
    const FeasibilityReport rep = check_interim_feasibility(qe, g, kUniform, 2, 1);
    CHECK(rep.pass);
    CHECK(std::abs(rep.worst_slack) < 1e-12);
  }

  SUBCASE("a lifted allocation fails near the top") {
    const Eigen::ArrayXd q = (qe + 0.05).min(1.0);
    const FeasibilityReport rep =
        check_interim_feasibility(q, g, kUniform, 2, 1, 1e-9);
    CHECK(!rep.pass);
    CHECK(rep.worst_theta > 0.5);
    // quadrature oracle at the flagged point: tail of (Q - Q_E) against F
    const double t0 = rep.worst_theta;
    double tail = 0.0;
    const int steps = 20000;
    for (int i = 0; i < steps; ++i) {
      const double t = t0 + (1.0 - t0) * (i + 0.5) / steps;
      tail += (std::min(t + 0.05, 1.0) - t) * (1.0 - t0) / steps;
    }
    CHECK(rep.worst_slack == doctest::Approx(tail).epsilon(1e-2));
  }

  SUBCASE("non-monotone input is routed to the rearrangement") {
    Eigen::ArrayXd q = qe;
    q[500] = 0.1;
    CHECK_THROWS_WITH_AS(check_interim_feasibility(q, g, kUniform, 2, 1),
                         doctest::Contains("monotone_rearrangement"),
                         std::invalid_argument);
  }
}

TEST_CASE("monotone rearrangement") {
  const TypeGrid g = make_type_grid(kUniform, 800);

  SUBCASE("monotone input is a fixed point") {
    const Eigen::ArrayXd q = g.points.square();
    CHECK((monotone_rearrangement(q, g) - q).abs().maxCoeff() < 1e-12);
  }

  SUBCASE("reflection flips") {
    const Eigen::ArrayXd q = 1.0 - g.points;
    const Eigen::ArrayXd qr = monotone_rearrangement(q, g);
    CHECK((qr - g.points).abs().maxCoeff() < 2.0 / 800);
  }

  SUBCASE("two-level step swaps") {
    Eigen::ArrayXd q(g.size());
    for (Eigen::Index j = 0; j < g.size(); ++j)
      q[j] = g.points[j] < 0.5 ? 0.6 : 0.2;
    const Eigen::ArrayXd qr = monotone_rearrangement(q, g);
    for (Eigen::Index j = 0; j < g.size(); ++j) {
      const double expect = g.points[j] < 0.5 ? 0.2 : 0.6;
      if (std::abs(g.points[j] - 0.5) > 1e-3) CHECK(qr[j] == expect);
    }
  }

  SUBCASE("measure preservation and efficiency gain") {
    auto rng = make_rng(17);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 60; ++trial) {
      // block-constant values aligned to grid cells
      Eigen::ArrayXd q(g.size());
      Eigen::Index j = 0;
      while (j < g.size()) {
        const Eigen::Index len = 1 + static_cast<Eigen::Index>(unif(rng) * 80);
        const double level = unif(rng);
        for (Eigen::Index l = j; l < std::min(g.size(), j + len); ++l) q[l] = level;
        j += len;
      }
      const Eigen::ArrayXd qr = monotone_rearrangement(q, g);
      for (Eigen::Index l = 1; l < g.size(); ++l) CHECK(qr[l] >= qr[l - 1]);
      // total-variation distance between the two weighted value measures
      std::map<double, double> in_mass, out_mass;
      for (Eigen::Index l = 0; l < g.size(); ++l) {
        in_mass[q[l]] += g.weights[l];
        out_mass[qr[l]] += g.weights[l];
      }
      double tv = 0.0;
      for (const auto& [v, mass] : in_mass) tv += std::abs(mass - out_mass[v]);
      for (const auto& [v, mass] : out_mass)
        if (!in_mass.count(v)) tv += mass;
      CHECK(tv / 2 <= 1e-6);
      // matching efficiency may only improve
      const double before = (g.weights * g.points * q).sum();
      const double after = (g.weights * g.points * qr).sum();
      CHECK(after >= before - 1e-9);
    }
  }
}

TEST_CASE("region classification") {
  SUBCASE("uniform optimum is one no-tension interval") {
    const MechanismPair pair = wta_pair(kUniform, make_type_grid(kUniform, 500), 2, 1, 1.0);
    const RegionPartition regions = classify_regions(pair, kUniform);
    REQUIRE(regions.intervals.size() == 1);
    CHECK(regions.intervals[0].tag == RegionTag::NoTension);
    CHECK(regions.intervals[0].lo == 0.0);
    CHECK(regions.intervals[0].hi == 1.0);
    CHECK(region_measure(regions, kUniform, RegionTag::NoTension) ==
          doctest::Approx(1.0));
  }

  SUBCASE("hand-built three-interval structure") {
    // square efficient rule with a slope-one pooled segment on (a, b);
    // b is the quartic root of the pool integral (line - Q_E) dF = 0
    const auto spec = DistributionSpec::power(2, 0, 1);
    const double a = 1.0 / 3.0;
    const double b = 0.804737854124365;
    const double h = 1.0 / 2000;
    const auto pair = make_pair(
        spec, 2000,
        [&](double t) {
          const double line = a * a + (t - a);
          if (t <= a) return t * t;
          if (t + 0.5 * h <= b) return line;
          if (t - 0.5 * h >= b) return t * t;
          const double lam = (b - (t - 0.5 * h)) / h;  // jump-cell mass mix
          return lam * line + (1.0 - lam) * t * t;
        },
        [&](double t) { return t <= a ? t * t : a * a + (t - a); });
    const RegionPartition regions = classify_regions(pair, spec);
    REQUIRE(regions.intervals.size() == 3);
    CHECK(regions.intervals[0].tag == RegionTag::NoTension);
    CHECK(regions.intervals[1].tag == RegionTag::NoEffort);
    CHECK(regions.intervals[2].tag == RegionTag::Efficient);
    CHECK(regions.intervals[1].lo == doctest::Approx(a).epsilon(2e-3));
    CHECK(regions.intervals[1].hi == doctest::Approx(b).epsilon(2e-3));
    // intervals cover the support
    double measure = 0.0;
    for (const auto& iv : regions.intervals) measure += spec.cdf(iv.hi) - spec.cdf(iv.lo);
    CHECK(measure >= 1.0 - 1e-6);
  }

  SUBCASE("more than 64 intervals overflows") {
    const TypeGrid g = make_type_grid(kUniform, 2000);
    MechanismPair pair;
    pair.grid = g;
    pair.eta = 1.0;
    pair.n = 2;
    pair.k = 1;
    pair.Q.resize(g.size());
    pair.U.resize(g.size());
    // 100 alternating flat/slope-eta blocks
    double u = 0.0;
    for (Eigen::Index j = 0; j < g.size(); ++j) {
      const int block = static_cast<int>(j / 20);
      if (j > 0 && block % 2 == 1) u += g.points[j] - g.points[j - 1];
      pair.Q[j] = u;
      pair.U[j] = u;
    }
    ClassifyTolerances tols;
    tols.min_run_cells = 1;
    CHECK_THROWS_WITH_AS(classify_regions(pair, kUniform, tols),
                         doctest::Contains("overflow"), std::runtime_error);
  }
}

TEST_CASE("equilibrium signal map") {
  const TypeGrid g = make_type_grid(kUniform, 500);

  SUBCASE("zero-effort equilibrium signals the type") {
    const auto pair = make_pair(kUniform, 500, [](double t) { return t; },
                                [](double t) { return t; });
    const Eigen::ArrayXd s = equilibrium_signal_map(pair);
    CHECK((s - g.points).abs().maxCoeff() < 1e-12);
  }

  SUBCASE("square allocation pays effort above one half") {
    const auto pair = make_pair(kUniform, 500, [](double t) { return t * t; },
                                [](double t) { return t <= 0.5 ? t * t : t - 0.25; });
    const Eigen::ArrayXd s = equilibrium_signal_map(pair);
    const Eigen::Index j = 400;  // theta = 0.8
    CHECK(g.points[j] == doctest::Approx(0.8));
    CHECK(s[j] == doctest::Approx(0.89).epsilon(1e-9));
    // implied effort cost matches the allocation-utility gap exactly
    for (Eigen::Index l = 0; l < g.size(); ++l) {
      CHECK(pair.eta * (s[l] - g.points[l]) ==
            doctest::Approx(pair.Q[l] - pair.U[l]).epsilon(1e-12));
      CHECK(s[l] >= g.points[l]);
      if (l > 0) CHECK(s[l] >= s[l - 1] - 1e-12);
    }
  }

  SUBCASE("incentive violations are rejected") {
    const auto pair = make_pair(kUniform, 100, [](double t) { return t; },
                                [](double t) { return 0.3 * t; });
    CHECK_THROWS_AS(equilibrium_signal_map(pair), std::invalid_argument);
  }
}
