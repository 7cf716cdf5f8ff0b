#include "contestopt/nonlinear.hpp"

#include <cmath>
#include <stdexcept>

namespace contestopt {

CostSpec CostSpec::linear(double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
  CostSpec c;
  c.family_ = CostFamily::Linear;
  c.scale_ = eta;
  return c;
}

CostSpec CostSpec::quadratic(double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("cost scale must be positive");
  CostSpec c;
  c.family_ = CostFamily::Quadratic;
  c.scale_ = scale;
  c.exponent_ = 2.0;
  return c;
}

CostSpec CostSpec::power(double scale, double p) {
  if (!(scale > 0.0)) throw std::invalid_argument("cost scale must be positive");
  if (!(p >= 1.0 && p <= 2.0))
    throw std::invalid_argument("power cost exponent must lie in [1, 2]");
  CostSpec c;
  c.family_ = CostFamily::PowerCost;
  c.scale_ = scale;
  c.exponent_ = p;
  return c;
}

double CostSpec::cost(double e) const {
  if (e <= 0.0) return 0.0;
  switch (family_) {
    case CostFamily::Linear: return scale_ * e;
    case CostFamily::Quadratic: return 0.5 * scale_ * e * e;
    case CostFamily::PowerCost: return scale_ * std::pow(e, exponent_);
  }
  return 0.0;
}

double CostSpec::inverse(double y) const {
  if (y < 0.0) throw std::invalid_argument("cost inverse needs y >= 0");
  switch (family_) {
    case CostFamily::Linear: return y / scale_;
    case CostFamily::Quadratic: return std::sqrt(2.0 * y / scale_);
    case CostFamily::PowerCost: return std::pow(y / scale_, 1.0 / exponent_);
  }
  return 0.0;
}

void DiscreteTypeModel::validate() const {
  if (types.size() < 1) throw std::invalid_argument("empty type support");
  if (probs.size() != types.size() || Q.size() != types.size())
    throw std::invalid_argument("types, probs and Q must share a length");
  for (Eigen::Index j = 0; j < types.size(); ++j) {
    if (!(probs[j] > 0.0)) throw std::invalid_argument("type probabilities must be positive");
    if (!(Q[j] >= 0.0 && Q[j] <= 1.0))
      throw std::invalid_argument("allocations must lie in [0, 1]");
    if (j > 0 && !(types[j] > types[j - 1]))
      throw std::invalid_argument("types must be strictly increasing");
    if (j > 0 && Q[j] < Q[j - 1] - 1e-12)
      throw std::invalid_argument("allocation must be non-decreasing");
  }
  if (std::abs(probs.sum() - 1.0) > 1e-9)
    throw std::invalid_argument("type probabilities must sum to 1");
}

DiscreteContest construct_discrete_contest(const DiscreteTypeModel& model,
                                           const CostSpec& cost) {
  model.validate();
  const Eigen::Index m = model.types.size();
  DiscreteContest out;
  out.signals.resize(m);
  out.utilities.resize(m);
  out.signals[0] = model.types[0];
  out.utilities[0] = model.Q[0];
  for (Eigen::Index j = 1; j < m; ++j) {
    const double gap = model.Q[j] - out.utilities[j - 1];
    if (gap < -1e-12)
      throw std::runtime_error("allocation fell below the utility below it");
    out.signals[j] = model.types[j - 1] + cost.inverse(std::max(gap, 0.0));
    out.utilities[j] =
        model.Q[j] - cost.cost(std::max(0.0, out.signals[j] - model.types[j]));
  }
  return out;
}

double certainty_equivalent_effort(
    const CostSpec& cost, const Eigen::Ref<const Eigen::ArrayXd>& efforts,
    const Eigen::Ref<const Eigen::ArrayXd>& probs) {
  if (efforts.size() != probs.size() || efforts.size() == 0)
    throw std::invalid_argument("efforts and probabilities must share a length");
  if (std::abs(probs.sum() - 1.0) > 1e-9)
    throw std::invalid_argument("effort probabilities must sum to 1");
  double expected = 0.0;
  for (Eigen::Index i = 0; i < efforts.size(); ++i) {
    if (efforts[i] < 0.0) throw std::invalid_argument("efforts must be non-negative");
    expected += probs[i] * cost.cost(efforts[i]);
  }
  return cost.inverse(expected);
}

DiscreteIcReport global_ic_check_discrete(const DiscreteTypeModel& model,
                                          const CostSpec& cost,
                                          const DiscreteContest& contest,
                                          double tol) {
  DiscreteIcReport rep;
  const Eigen::Index m = model.types.size();
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index l = 0; l < m; ++l) {
      const double mimic =
          model.Q[l] -
          cost.cost(std::max(0.0, contest.signals[l] - model.types[j]));
      const double gain = mimic - contest.utilities[j];
      if (gain > tol && gain > rep.gain) {
        rep.pass = false;
        rep.from = j;
        rep.to = l;
        rep.gain = gain;
      }
    }
    // opting out produces nothing and costs nothing
    if (0.0 - contest.utilities[j] > tol) {
      rep.pass = false;
      rep.from = j;
      rep.to = -1;
      rep.gain = -contest.utilities[j];
    }
  }
  return rep;
}

}  // namespace contestopt
