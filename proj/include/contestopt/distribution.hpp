#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <vector>

namespace contestopt {

enum class Family { Uniform, Power, PiecewiseLinearCdf };

// Numerically computed density bounds over the open support. For families
// whose density is unbounded (power with exponent < 1) the corresponding
// entries are infinite.
struct DensityBounds {
  double f_min = 0.0;
  double f_max = 0.0;
  double fprime_min = 0.0;
};

// Parametric type distribution F on a bounded support [lower, upper] with
// positive density on the interior.
class DistributionSpec {
 public:
  static DistributionSpec uniform(double lo, double hi);
  static DistributionSpec power(double exponent, double lo, double hi);
  // Knots are (theta, F(theta)) pairs; first must map to 0, last to 1, and F
  // must be strictly increasing so the inverse is exact.
  static DistributionSpec piecewise_linear_cdf(
      std::vector<std::array<double, 2>> knots);

  Family family() const { return family_; }
  double lower() const { return lo_; }
  double upper() const { return hi_; }
  double power_exponent() const { return exponent_; }
  const std::vector<std::array<double, 2>>& knots() const { return knots_; }

  double cdf(double theta) const;
  double pdf(double theta) const;
  double quantile(double u) const;

  Eigen::ArrayXd cdf(const Eigen::Ref<const Eigen::ArrayXd>& theta) const;
  Eigen::ArrayXd pdf(const Eigen::Ref<const Eigen::ArrayXd>& theta) const;
  Eigen::ArrayXd quantile(const Eigen::Ref<const Eigen::ArrayXd>& u) const;

  DensityBounds density_bounds() const;

 private:
  DistributionSpec() = default;

  Family family_ = Family::Uniform;
  double lo_ = 0.0;
  double hi_ = 1.0;
  double exponent_ = 1.0;
  std::vector<std::array<double, 2>> knots_;
};

// Finite discretization of the type space: cells+1 uniformly spaced points
// with integration weights against F, normalized to sum 1.
struct TypeGrid {
  Eigen::ArrayXd points;
  Eigen::ArrayXd weights;

  Eigen::Index size() const { return points.size(); }
  Eigen::Index cells() const { return points.size() - 1; }
};

TypeGrid make_type_grid(const DistributionSpec& spec, Eigen::Index cells = 2000);

// Probability that a binomial(n-1, 1-u) count is below k: the interim share
// of an agent at cdf-quantile u when the k highest of n types win.
double efficient_allocation_from_cdf(double u, int n, int k);

// Interim allocation of the assortative rule (items to the top-k types).
double efficient_allocation(const DistributionSpec& spec, int n, int k,
                            double theta);
Eigen::ArrayXd efficient_allocation_curve(
    const DistributionSpec& spec, int n, int k,
    const Eigen::Ref<const Eigen::ArrayXd>& theta);

// d/dtheta of the efficient allocation.
double efficient_allocation_slope(const DistributionSpec& spec, int n, int k,
                                  double theta);

// Integral of the efficient allocation against F over [theta, upper]. Equals
// k/n at the lower support end.
double efficient_tail_integral(const DistributionSpec& spec, int n, int k,
                               double theta);

// count x n matrix of i.i.d. type profiles, deterministic in the seed.
Eigen::MatrixXd sample_types(const DistributionSpec& spec, int n,
                             Eigen::Index count, std::uint64_t seed);

}  // namespace contestopt
