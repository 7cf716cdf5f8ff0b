#include "contestopt/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "contestopt/quadrature.hpp"
#include "contestopt/rng.hpp"

namespace contestopt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_support(double lo, double hi) {
  if (!(lo >= 0.0) || !(lo < hi) || !std::isfinite(hi))
    throw std::invalid_argument("support must satisfy 0 <= lower < upper < inf");
}

double log_choose(int n, int j) {
  return std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0);
}

}  // namespace

DistributionSpec DistributionSpec::uniform(double lo, double hi) {
  check_support(lo, hi);
  DistributionSpec s;
  s.family_ = Family::Uniform;
  s.lo_ = lo;
  s.hi_ = hi;
  return s;
}

DistributionSpec DistributionSpec::power(double exponent, double lo, double hi) {
  check_support(lo, hi);
  if (!(exponent > 0.0) || !std::isfinite(exponent))
    throw std::invalid_argument("power exponent must be positive and finite");
  DistributionSpec s;
  s.family_ = Family::Power;
  s.lo_ = lo;
  s.hi_ = hi;
  s.exponent_ = exponent;
  return s;
}

DistributionSpec DistributionSpec::piecewise_linear_cdf(
    std::vector<std::array<double, 2>> knots) {
  if (knots.size() < 2)
    throw std::invalid_argument("piecewise-linear cdf needs at least 2 knots");
  if (knots.front()[1] != 0.0 || knots.back()[1] != 1.0)
    throw std::invalid_argument("cdf knots must start at F=0 and end at F=1");
  for (std::size_t i = 1; i < knots.size(); ++i) {
    if (!(knots[i][0] > knots[i - 1][0]) || !(knots[i][1] > knots[i - 1][1]))
      throw std::invalid_argument("cdf knots must be strictly increasing in both coordinates");
  }
  check_support(knots.front()[0], knots.back()[0]);
  DistributionSpec s;
  s.family_ = Family::PiecewiseLinearCdf;
  s.lo_ = knots.front()[0];
  s.hi_ = knots.back()[0];
  s.knots_ = std::move(knots);
  return s;
}

double DistributionSpec::cdf(double theta) const {
  if (!(theta >= lo_ && theta <= hi_))
    throw std::domain_error("cdf argument outside the support");
  switch (family_) {
    case Family::Uniform:
      return (theta - lo_) / (hi_ - lo_);
    case Family::Power:
      return std::pow((theta - lo_) / (hi_ - lo_), exponent_);
    case Family::PiecewiseLinearCdf: {
      auto it = std::upper_bound(knots_.begin(), knots_.end(), theta,
                                 [](double t, const std::array<double, 2>& k) {
                                   return t < k[0];
                                 });
      if (it == knots_.begin()) return 0.0;
      if (it == knots_.end()) return 1.0;
      const auto& hi = *it;
      const auto& lo = *(it - 1);
      const double w = (theta - lo[0]) / (hi[0] - lo[0]);
      return lo[1] + w * (hi[1] - lo[1]);
    }
  }
  return 0.0;
}

double DistributionSpec::pdf(double theta) const {
  if (!(theta >= lo_ && theta <= hi_))
    throw std::domain_error("pdf argument outside the support");
  switch (family_) {
    case Family::Uniform:
      return 1.0 / (hi_ - lo_);
    case Family::Power: {
      const double t = (theta - lo_) / (hi_ - lo_);
      if (t == 0.0) return exponent_ > 1.0 ? 0.0 : (exponent_ == 1.0 ? 1.0 / (hi_ - lo_) : kInf);
      return exponent_ * std::pow(t, exponent_ - 1.0) / (hi_ - lo_);
    }
    case Family::PiecewiseLinearCdf: {
      auto it = std::upper_bound(knots_.begin(), knots_.end(), theta,
                                 [](double t, const std::array<double, 2>& k) {
                                   return t < k[0];
                                 });
      if (it == knots_.end()) it = knots_.end() - 1;  // right endpoint: left slope
      if (it == knots_.begin()) it = knots_.begin() + 1;
      const auto& hi = *it;
      const auto& lo = *(it - 1);
      return (hi[1] - lo[1]) / (hi[0] - lo[0]);
    }
  }
  return 0.0;
}

double DistributionSpec::quantile(double u) const {
  if (!(u >= 0.0 && u <= 1.0))
    throw std::domain_error("quantile argument outside [0, 1]");
  switch (family_) {
    case Family::Uniform:
      return lo_ + u * (hi_ - lo_);
    case Family::Power:
      return lo_ + std::pow(u, 1.0 / exponent_) * (hi_ - lo_);
    case Family::PiecewiseLinearCdf: {
      auto it = std::upper_bound(knots_.begin(), knots_.end(), u,
                                 [](double v, const std::array<double, 2>& k) {
                                   return v < k[1];
                                 });
      if (it == knots_.begin()) return lo_;
      if (it == knots_.end()) return hi_;
      const auto& hi = *it;
      const auto& lo = *(it - 1);
      const double w = (u - lo[1]) / (hi[1] - lo[1]);
      return lo[0] + w * (hi[0] - lo[0]);
    }
  }
  return lo_;
}

Eigen::ArrayXd DistributionSpec::cdf(
    const Eigen::Ref<const Eigen::ArrayXd>& theta) const {
  return theta.unaryExpr([this](double t) { return cdf(t); });
}

Eigen::ArrayXd DistributionSpec::pdf(
    const Eigen::Ref<const Eigen::ArrayXd>& theta) const {
  return theta.unaryExpr([this](double t) { return pdf(t); });
}

Eigen::ArrayXd DistributionSpec::quantile(
    const Eigen::Ref<const Eigen::ArrayXd>& u) const {
  return u.unaryExpr([this](double v) { return quantile(v); });
}

DensityBounds DistributionSpec::density_bounds() const {
  DensityBounds b;
  switch (family_) {
    case Family::Uniform:
      b.f_min = b.f_max = 1.0 / (hi_ - lo_);
      b.fprime_min = 0.0;
      break;
    case Family::Power: {
      const double scale = hi_ - lo_;
      if (exponent_ >= 1.0) {
        b.f_min = exponent_ > 1.0 ? 0.0 : 1.0 / scale;
        b.f_max = exponent_ / scale;
        b.fprime_min = 0.0;  // density non-decreasing for exponent >= 1
      } else {
        b.f_min = exponent_ / scale;
        b.f_max = kInf;
        b.fprime_min = -kInf;
      }
      break;
    }
    case Family::PiecewiseLinearCdf: {
      b.f_min = kInf;
      b.f_max = 0.0;
      double prev_slope = -1.0;
      for (std::size_t i = 1; i < knots_.size(); ++i) {
        const double slope =
            (knots_[i][1] - knots_[i - 1][1]) / (knots_[i][0] - knots_[i - 1][0]);
        b.f_min = std::min(b.f_min, slope);
        b.f_max = std::max(b.f_max, slope);
        // a density drop at a knot is an unbounded negative slope
        if (i > 1 && slope < prev_slope) b.fprime_min = -kInf;
        prev_slope = slope;
      }
      break;
    }
  }
  return b;
}

TypeGrid make_type_grid(const DistributionSpec& spec, Eigen::Index cells) {
  if (cells < 2) throw std::invalid_argument("type grid needs at least 2 cells");
  TypeGrid g;
  g.points = Eigen::ArrayXd::LinSpaced(cells + 1, spec.lower(), spec.upper());
  const double h = (spec.upper() - spec.lower()) / static_cast<double>(cells);
  g.weights.resize(cells + 1);
  for (Eigen::Index j = 0; j <= cells; ++j) {
    const double width = (j == 0 || j == cells) ? 0.5 * h : h;
    const double f = spec.pdf(g.points[j]);
    if (std::isfinite(f)) {
      g.weights[j] = f * width;
    } else {
      // unbounded endpoint density: use the exact half-cell mass instead
      const double a = std::max(spec.lower(), g.points[j] - 0.5 * h);
      const double b = std::min(spec.upper(), g.points[j] + 0.5 * h);
      g.weights[j] = spec.cdf(b) - spec.cdf(a);
    }
  }
  g.weights /= g.weights.sum();
  return g;
}

double efficient_allocation_from_cdf(double u, int n, int k) {
  if (!(k > 0 && k < n))
    throw std::invalid_argument("efficient allocation requires 0 < k < n");
  if (!(u >= 0.0 && u <= 1.0))
    throw std::domain_error("cdf value outside [0, 1]");
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  const int m = n - 1;
  if (n <= 60) {
    double term = std::pow(u, m);  // j = 0
    double sum = term;
    for (int j = 0; j + 1 < k; ++j) {
      term *= static_cast<double>(m - j) / static_cast<double>(j + 1) *
              ((1.0 - u) / u);
      sum += term;
    }
    return std::min(1.0, sum);
  }
  // log-space for large n to avoid underflow in the binomial terms
  const double lu = std::log(u);
  const double l1u = std::log1p(-u);
  double lmax = -kInf;
  std::vector<double> lt(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    lt[j] = log_choose(m, j) + j * l1u + (m - j) * lu;
    lmax = std::max(lmax, lt[j]);
  }
  if (lmax == -kInf) return 0.0;
  double sum = 0.0;
  for (int j = 0; j < k; ++j) sum += std::exp(lt[j] - lmax);
  return std::min(1.0, std::exp(lmax) * sum);
}

double efficient_allocation(const DistributionSpec& spec, int n, int k,
                            double theta) {
  return efficient_allocation_from_cdf(spec.cdf(theta), n, k);
}

Eigen::ArrayXd efficient_allocation_curve(
    const DistributionSpec& spec, int n, int k,
    const Eigen::Ref<const Eigen::ArrayXd>& theta) {
  return theta.unaryExpr([&](double t) {
    return efficient_allocation(spec, n, k, t);
  });
}

double efficient_allocation_slope(const DistributionSpec& spec, int n, int k,
                                  double theta) {
  if (!(k > 0 && k < n))
    throw std::invalid_argument("efficient allocation requires 0 < k < n");
  const double u = spec.cdf(theta);
  const double f = spec.pdf(theta);
  if (u <= 0.0 || u >= 1.0) {
    // density of the k-th highest opponent order statistic vanishes at the
    // support edges unless the binomial weight is constant there
    if (u <= 0.0 && n - 1 == k) return f * (n - 1) * std::pow(1.0 - u, k - 1);
    if (u >= 1.0 && k == 1) return f * (n - 1);
    return 0.0;
  }
  const int m = n - 1;
  const double lt = log_choose(m - 1, k - 1) + (k - 1) * std::log1p(-u) +
                    (m - k) * std::log(u);
  return f * m * std::exp(lt);
}

double efficient_tail_integral(const DistributionSpec& spec, int n, int k,
                               double theta) {
  if (!(k > 0 && k < n))
    throw std::invalid_argument("efficient allocation requires 0 < k < n");
  const double u0 = spec.cdf(theta);
  // substitute u = F(z): the integrand becomes the binomial tail in u
  return integrate(
      [&](double u) { return efficient_allocation_from_cdf(u, n, k); }, u0,
      1.0, 1e-13);
}

Eigen::MatrixXd sample_types(const DistributionSpec& spec, int n,
                             Eigen::Index count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("sample count must be >= 1");
  if (n < 1) throw std::invalid_argument("agent count must be >= 1");
  Eigen::MatrixXd out(count, n);
  auto rng = make_rng(seed);
  for (Eigen::Index i = 0; i < count; ++i) {
    for (int j = 0; j < n; ++j) {
      // 53-bit mantissa uniform; bit-reproducible across platforms
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      out(i, j) = spec.quantile(u);
    }
  }
  return out;
}

}  // namespace contestopt
