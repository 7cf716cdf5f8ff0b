#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <vector>

namespace contestopt {

// min c'x  s.t.  A x = b,  lower <= x <= upper.
// All lower bounds must be finite; upper bounds may be +inf. Inequalities are
// expected to be rewritten with explicit bounded slack variables.
struct LpProblem {
  Eigen::Index vars = 0;
  Eigen::Index rows = 0;
  std::vector<Eigen::Triplet<double>> coeffs;
  Eigen::VectorXd c, b, lower, upper;

  void resize(Eigen::Index num_vars, Eigen::Index num_rows);
  void add(Eigen::Index row, Eigen::Index col, double value) {
    coeffs.emplace_back(static_cast<int>(row), static_cast<int>(col), value);
  }
};

struct LpOptions {
  double tol = 1e-8;
  int max_iterations = 200;
  bool trace = false;
};

struct LpSolution {
  Eigen::VectorXd x;
  double objective = 0.0;
  int iterations = 0;
  bool optimal = false;
  double primal_infeasibility = 0.0;
  double dual_infeasibility = 0.0;
  double gap = 0.0;
};

// Mehrotra predictor-corrector interior point with sparse normal equations.
LpSolution solve_lp(const LpProblem& problem, const LpOptions& options = {});

}  // namespace contestopt
