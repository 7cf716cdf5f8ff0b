#pragma once

#include <Eigen/Core>

namespace contestopt {

enum class CostFamily { Linear, Quadratic, PowerCost };

// Effort cost C with C(0) = 0, C' > 0, C'' >= 0 and C''' <= 0; closed under
// inversion. Power exponents are restricted to [1, 2] so the concave-marginal
// condition holds.
class CostSpec {
 public:
  static CostSpec linear(double eta);          // eta * e
  static CostSpec quadratic(double c);         // c * e^2 / 2
  static CostSpec power(double c, double p);   // c * e^p, p in [1, 2]

  double cost(double e) const;
  double inverse(double y) const;
  CostFamily family() const { return family_; }
  double scale() const { return scale_; }
  double exponent() const { return exponent_; }

 private:
  CostFamily family_ = CostFamily::Linear;
  double scale_ = 1.0;
  double exponent_ = 1.0;
};

// Finite type support with probabilities and a monotone interim allocation.
struct DiscreteTypeModel {
  Eigen::ArrayXd types;
  Eigen::ArrayXd probs;
  Eigen::ArrayXd Q;

  void validate() const;
};

struct DiscreteContest {
  Eigen::ArrayXd signals;    // menu signal per type
  Eigen::ArrayXd utilities;  // implemented interim utility per type
};

// Induction construction of the contest menu: each type's signal makes the
// type below indifferent to mimicking it, pinning the utility-maximal
// incentive-compatible utilities.
DiscreteContest construct_discrete_contest(const DiscreteTypeModel& model,
                                           const CostSpec& cost);

// Deterministic effort with the same cost as a stochastic effort
// recommendation: C(e_G) = E[C(e)].
double certainty_equivalent_effort(const CostSpec& cost,
                                   const Eigen::Ref<const Eigen::ArrayXd>& efforts,
                                   const Eigen::Ref<const Eigen::ArrayXd>& probs);

struct DiscreteIcReport {
  bool pass = true;
  Eigen::Index from = -1;  // type with a profitable deviation
  Eigen::Index to = -1;    // menu option it prefers
  double gain = 0.0;
};

// Every (true type, reported type) pair is checked against the menu,
// including the opt-out of producing nothing.
DiscreteIcReport global_ic_check_discrete(const DiscreteTypeModel& model,
                                          const CostSpec& cost,
                                          const DiscreteContest& contest,
                                          double tol = 1e-9);

}  // namespace contestopt
