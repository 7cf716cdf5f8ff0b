#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "contestopt/distribution.hpp"
#include "contestopt/quadrature.hpp"
#include "contestopt/rng.hpp"

using namespace contestopt;

namespace {

// Monte Carlo oracle: probability that a type at theta lands in the top k of
// n agents, from raw order statistics.
double mc_efficient_allocation(const DistributionSpec& spec, int n, int k,
                               double theta, Eigen::Index samples,
                               std::uint64_t seed) {
  auto rng = make_rng(seed);
  Eigen::Index wins = 0;
  std::vector<double> opp(static_cast<std::size_t>(n - 1));
  for (Eigen::Index i = 0; i < samples; ++i) {
    for (auto& o : opp) o = spec.quantile(static_cast<double>(rng() >> 11) * 0x1.0p-53);
    const Eigen::Index above =
        std::count_if(opp.begin(), opp.end(), [&](double t) { return t > theta; });
    if (above < k) ++wins;
  }
  return static_cast<double>(wins) / static_cast<double>(samples);
}

}  // namespace

TEST_CASE("cdf/pdf/quantile for the parametric families") {
  const auto uni = DistributionSpec::uniform(0, 1);
  CHECK(uni.cdf(0.3) == doctest::Approx(0.3).epsilon(1e-12));

  const auto pow2 = DistributionSpec::power(2, 0, 1);
  CHECK(pow2.cdf(0.5) == doctest::Approx(0.25).epsilon(1e-12));

  const auto pwl = DistributionSpec::piecewise_linear_cdf({{0, 0}, {0.5, 0.8}, {1, 1}});
  CHECK(pwl.quantile(0.8) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(pwl.cdf(0.25) == doctest::Approx(0.4).epsilon(1e-12));

  SUBCASE("quantile is the exact inverse on a grid") {
    for (const auto& spec : {uni, pow2, pwl}) {
      const TypeGrid grid = make_type_grid(spec, 500);
      for (Eigen::Index j = 0; j < grid.size(); ++j) {
        CHECK(spec.quantile(spec.cdf(grid.points[j])) ==
              doctest::Approx(grid.points[j]).epsilon(1e-9));
      }
    }
  }

  SUBCASE("pdf is the derivative of the cdf") {
    const double h = 1e-6;
    for (const auto& spec : {uni, pow2, pwl}) {
      for (double t : {0.11, 0.31, 0.62, 0.87}) {
        const double fd = (spec.cdf(t + h) - spec.cdf(t - h)) / (2 * h);
        CHECK(spec.pdf(t) == doctest::Approx(fd).epsilon(1e-5));
      }
    }
  }

  SUBCASE("domain errors") {
    CHECK_THROWS_AS(uni.cdf(-0.1), std::domain_error);
    CHECK_THROWS_AS(uni.cdf(1.1), std::domain_error);
    CHECK_THROWS_AS(uni.quantile(1.5), std::domain_error);
    CHECK_THROWS_AS(pow2.pdf(2.0), std::domain_error);
    CHECK_THROWS_AS(DistributionSpec::power(-1, 0, 1), std::invalid_argument);
    CHECK_THROWS_AS(DistributionSpec::uniform(1, 1), std::invalid_argument);
    CHECK_THROWS_AS(DistributionSpec::piecewise_linear_cdf({{0, 0}, {1, 0.9}}),
                    std::invalid_argument);
  }
}

TEST_CASE("type grid weights") {
  for (const auto& spec :
       {DistributionSpec::uniform(0, 1), DistributionSpec::power(2, 0, 1),
        DistributionSpec::power(0.5, 0, 2)}) {
    const TypeGrid grid = make_type_grid(spec, 777);
    CHECK(std::abs(grid.weights.sum() - 1.0) < 1e-6);
    CHECK(grid.points[0] == spec.lower());
    CHECK(grid.points[grid.size() - 1] == spec.upper());
    CHECK((grid.weights > 0).all());
  }
}

TEST_CASE("efficient allocation") {
  const auto uni = DistributionSpec::uniform(0, 1);
  const auto pow2 = DistributionSpec::power(2, 0, 1);

  CHECK(efficient_allocation(uni, 2, 1, 0.7) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(efficient_allocation(pow2, 2, 1, 0.5) == doctest::Approx(0.25).epsilon(1e-12));

  SUBCASE("binomial sum vs order-statistics sampling") {
    // uniform, n=3, k=2: closed form 2 theta - theta^2
    CHECK(efficient_allocation(uni, 3, 2, 0.5) == doctest::Approx(0.75).epsilon(1e-12));
    const double mc = mc_efficient_allocation(uni, 3, 2, 0.5, 1000000, 99);
    const double se = std::sqrt(0.75 * 0.25 / 1e6);
    CHECK(std::abs(mc - 0.75) < 3 * se);
  }

  SUBCASE("monotone and pinned at the support ends") {
    for (int n : {2, 3, 7, 80, 240}) {
      for (int k : {1, n / 2, n - 1}) {
        if (!(k > 0 && k < n)) continue;
        const Eigen::ArrayXd th = Eigen::ArrayXd::LinSpaced(401, 0, 1);
        const Eigen::ArrayXd q = efficient_allocation_curve(pow2, n, k, th);
        CHECK(q[0] == 0.0);
        CHECK(q[400] == 1.0);
        for (Eigen::Index j = 1; j < q.size(); ++j)
          CHECK(q[j] >= q[j - 1] - 1e-12);
      }
    }
  }

  SUBCASE("parameter errors") {
    CHECK_THROWS_AS(efficient_allocation(uni, 2, 2, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(efficient_allocation(uni, 2, 0, 0.5), std::invalid_argument);
  }

  SUBCASE("slope matches a central difference") {
    for (int n : {2, 5, 40}) {
      for (double t : {0.2, 0.5, 0.8}) {
        const double h = 1e-6;
        const double fd = (efficient_allocation(pow2, n, 1, t + h) -
                           efficient_allocation(pow2, n, 1, t - h)) /
                          (2 * h);
        CHECK(efficient_allocation_slope(pow2, n, 1, t) ==
              doctest::Approx(fd).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("efficient tail integral") {
  const auto uni = DistributionSpec::uniform(0, 1);
  const auto pow2 = DistributionSpec::power(2, 0, 1);

  CHECK(efficient_tail_integral(uni, 2, 1, 0.0) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(efficient_tail_integral(pow2, 5, 2, 1.0) == doctest::Approx(0.0).epsilon(1e-12));

  // power p=2, n=2, k=1 from theta = 1/3: antiderivative of 2 z^3 is z^4/2,
  // so the integral is 1/2 - (1/3)^4/2
  const double expected = 0.5 * (1.0 - std::pow(1.0 / 3.0, 4));
  CHECK(expected == doctest::Approx(0.49382716049382713).epsilon(1e-12));
  CHECK(efficient_tail_integral(pow2, 2, 1, 1.0 / 3.0) ==
        doctest::Approx(expected).epsilon(1e-9));
  // cross-check by direct quadrature in theta space
  const double quad = integrate(
      [&](double z) { return z * z * pow2.pdf(z); }, 1.0 / 3.0, 1.0, 1e-12);
  CHECK(efficient_tail_integral(pow2, 2, 1, 1.0 / 3.0) ==
        doctest::Approx(quad).epsilon(1e-6));

  SUBCASE("full integral equals the ex-ante share k/n") {
    for (auto [n, k] : std::vector<std::pair<int, int>>{{2, 1}, {5, 2}, {120, 40}}) {
      CHECK(std::abs(efficient_tail_integral(pow2, n, k, 0.0) -
                     static_cast<double>(k) / n) < 1e-6);
    }
  }

  SUBCASE("derivative is minus the integrand") {
    const double h = 1e-4;
    for (double t : {0.25, 0.5, 0.75}) {
      const double fd = (efficient_tail_integral(pow2, 4, 2, t + h) -
                         efficient_tail_integral(pow2, 4, 2, t - h)) /
                        (2 * h);
      const double expect = -efficient_allocation(pow2, 4, 2, t) * pow2.pdf(t);
      CHECK(std::abs(fd - expect) < 1e-4);
    }
  }
}

TEST_CASE("efficient allocation convexity for large n") {
  // uniform density: bounded below with non-negative slope, so convexity
  // kicks in at n = 2 already; same for the increasing piecewise family
  const auto uni = DistributionSpec::uniform(0, 1);
  for (int n : {2, 3, 5, 9}) {
    const Eigen::ArrayXd th = Eigen::ArrayXd::LinSpaced(801, 0, 1);
    const Eigen::ArrayXd q = efficient_allocation_curve(uni, n, 1, th);
    for (Eigen::Index j = 1; j + 1 < q.size(); ++j)
      CHECK(q[j + 1] - 2 * q[j] + q[j - 1] >= -1e-8);
  }
  CHECK(uni.density_bounds().fprime_min == 0.0);
  const auto pwl_up =
      DistributionSpec::piecewise_linear_cdf({{0, 0}, {0.6, 0.3}, {1, 1}});
  CHECK(pwl_up.density_bounds().f_min == doctest::Approx(0.5));
  // a density drop voids the slope bound
  const auto pwl_down =
      DistributionSpec::piecewise_linear_cdf({{0, 0}, {0.5, 0.8}, {1, 1}});
  CHECK(pwl_down.density_bounds().fprime_min ==
        -std::numeric_limits<double>::infinity());
}

TEST_CASE("type sampling") {
  const auto uni = DistributionSpec::uniform(0, 1);
  const auto pow2 = DistributionSpec::power(2, 0, 1);

  const Eigen::MatrixXd s1 = sample_types(uni, 3, 100000, 42);
  CHECK(std::abs(s1.mean() - 0.5) < 0.005);

  // E[theta] = integral of 2 theta^2 = 2/3 for the power family
  const Eigen::MatrixXd s2 = sample_types(pow2, 2, 100000, 43);
  CHECK(std::abs(s2.mean() - 2.0 / 3.0) < 0.005);

  const Eigen::MatrixXd s3 = sample_types(uni, 3, 1000, 42);
  CHECK((s1.topRows(1000) - s3).cwiseAbs().maxCoeff() == 0.0);

  SUBCASE("empirical cdf tracks the spec") {
    // Kolmogorov-Smirnov sanity; flagged, not fatal
    std::vector<double> v(s2.data(), s2.data() + 20000);
    std::sort(v.begin(), v.end());
    double ks = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double emp = static_cast<double>(i + 1) / static_cast<double>(v.size());
      ks = std::max(ks, std::abs(emp - pow2.cdf(v[i])));
    }
    WARN(ks < 2.0 / std::sqrt(static_cast<double>(v.size())));
  }
}
