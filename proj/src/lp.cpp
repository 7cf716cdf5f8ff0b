#include "contestopt/lp.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace contestopt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct State {
  Eigen::VectorXd x, y, zl, zu;
};

double step_limit(const Eigen::VectorXd& s, const Eigen::VectorXd& ds,
                  const std::vector<char>& active) {
  double a = 1.0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (active[static_cast<std::size_t>(i)] && ds[i] < 0.0)
      a = std::min(a, -s[i] / ds[i]);
  return a;
}

}  // namespace

void LpProblem::resize(Eigen::Index num_vars, Eigen::Index num_rows) {
  vars = num_vars;
  rows = num_rows;
  c = Eigen::VectorXd::Zero(vars);
  b = Eigen::VectorXd::Zero(rows);
  lower = Eigen::VectorXd::Zero(vars);
  upper = Eigen::VectorXd::Constant(vars, kInf);
}

LpSolution solve_lp(const LpProblem& problem, const LpOptions& options) {
  const Eigen::Index n = problem.vars;
  const Eigen::Index m = problem.rows;
  if (n <= 0 || m <= 0) throw std::invalid_argument("empty LP");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(problem.lower[i]))
      throw std::invalid_argument("LP lower bounds must be finite");
    if (problem.upper[i] <= problem.lower[i])
      throw std::invalid_argument("LP bounds must satisfy lower < upper");
  }

  Eigen::SparseMatrix<double> A(m, n);
  A.setFromTriplets(problem.coeffs.begin(), problem.coeffs.end());
  A.makeCompressed();
  const Eigen::SparseMatrix<double> At = A.transpose();

  std::vector<char> has_upper(static_cast<std::size_t>(n));
  std::vector<char> all(static_cast<std::size_t>(n), 1);
  Eigen::Index bound_count = n;
  for (Eigen::Index i = 0; i < n; ++i) {
    has_upper[static_cast<std::size_t>(i)] = std::isfinite(problem.upper[i]);
    if (has_upper[static_cast<std::size_t>(i)]) ++bound_count;
  }

  State s;
  s.x.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (has_upper[static_cast<std::size_t>(i)]) {
      s.x[i] = 0.5 * (problem.lower[i] + problem.upper[i]);
    } else {
      s.x[i] = problem.lower[i] + 1.0;
    }
  }
  s.y = Eigen::VectorXd::Zero(m);
  s.zl = Eigen::VectorXd::Ones(n);
  s.zu = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i)
    if (has_upper[static_cast<std::size_t>(i)]) s.zu[i] = 1.0;

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> chol;
  bool analyzed = false;

  const double bnorm = 1.0 + problem.b.lpNorm<Eigen::Infinity>();
  const double cnorm = 1.0 + problem.c.lpNorm<Eigen::Infinity>();

  LpSolution best;
  best.x = s.x;
  double best_score = kInf;
  int stalled = 0;

  LpSolution out;
  for (int iter = 0; iter <= options.max_iterations; ++iter) {
    Eigen::VectorXd sl = s.x - problem.lower;
    Eigen::VectorXd su(n);
    for (Eigen::Index i = 0; i < n; ++i)
      su[i] = has_upper[static_cast<std::size_t>(i)] ? problem.upper[i] - s.x[i]
                                                     : 1.0;

    const Eigen::VectorXd rp = problem.b - A * s.x;
    Eigen::VectorXd rd = problem.c - At * s.y - s.zl + s.zu;

    double gap = sl.dot(s.zl);
    for (Eigen::Index i = 0; i < n; ++i)
      if (has_upper[static_cast<std::size_t>(i)]) gap += su[i] * s.zu[i];
    const double mu = gap / static_cast<double>(bound_count);

    const double obj = problem.c.dot(s.x);
    const double rel_p = rp.lpNorm<Eigen::Infinity>() / bnorm;
    const double rel_d = rd.lpNorm<Eigen::Infinity>() / cnorm;
    const double rel_g = gap / (1.0 + std::abs(obj));

    if (options.trace)
      std::fprintf(stderr, "ipm %3d: mu=%.3e rp=%.3e rd=%.3e gap=%.3e obj=%.9f\n",
                   iter, mu, rel_p, rel_d, rel_g, obj);
    if (!std::isfinite(mu) || !std::isfinite(rel_p) || !std::isfinite(rel_d))
      break;
    const double score = std::max({rel_p, rel_d, rel_g});
    if (score < best_score) {
      best_score = score;
      best.x = s.x;
      best.objective = obj;
      best.iterations = iter;
      best.primal_infeasibility = rel_p;
      best.dual_infeasibility = rel_d;
      best.gap = rel_g;
      stalled = 0;
    } else if (++stalled > 15) {
      break;
    }
    if (rel_p <= options.tol && rel_d <= options.tol && rel_g <= options.tol) {
      best.optimal = true;
      break;
    }
    if (iter == options.max_iterations) break;
    if (mu < 1e-13) break;  // complementarity exhausted; endgame would destabilize

    // scaled Newton system: (A D A') dy = rp + A D g. The scaling matrix is
    // clamped to keep the normal equations factorable near the optimum;
    // iterative refinement below recovers the lost digits.
    Eigen::VectorXd d(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double di = s.zl[i] / std::max(sl[i], 1e-300);
      if (has_upper[static_cast<std::size_t>(i)])
        di += s.zu[i] / std::max(su[i], 1e-300);
      d[i] = 1.0 / std::clamp(di, 1e-14, 1e14);
    }

    Eigen::SparseMatrix<double> M = A * d.asDiagonal() * At;
    double reg = 1e-12 * (1.0 + d.maxCoeff());
    for (int attempt = 0;; ++attempt) {
      Eigen::SparseMatrix<double> Mr = M;
      for (Eigen::Index i = 0; i < m; ++i) Mr.coeffRef(i, i) += reg;
      if (!analyzed) {
        chol.analyzePattern(Mr);
        analyzed = true;
      }
      chol.factorize(Mr);
      if (chol.info() == Eigen::Success) break;
      if (attempt >= 8) throw std::runtime_error("LP normal equations factorization failed");
      reg *= 100.0;
    }

    auto solve_direction = [&](const Eigen::VectorXd& tl,
                               const Eigen::VectorXd& tu,
                               const Eigen::VectorXd& rp_in,
                               const Eigen::VectorXd& rd_in, State& dir) {
      Eigen::VectorXd g = rd_in;
      for (Eigen::Index i = 0; i < n; ++i) {
        g[i] -= tl[i] / sl[i];
        if (has_upper[static_cast<std::size_t>(i)]) g[i] += tu[i] / su[i];
      }
      const Eigen::VectorXd rhs = rp_in + A * (d.asDiagonal() * g);
      dir.y = chol.solve(rhs);
      // refine against the unregularized normal matrix so the shift does not
      // leak into the primal residual
      for (int round = 0; round < 3; ++round) {
        const Eigen::VectorXd r2 = rhs - M * dir.y;
        if (r2.lpNorm<Eigen::Infinity>() <=
            1e-13 * (1.0 + rhs.lpNorm<Eigen::Infinity>()))
          break;
        dir.y += chol.solve(r2);
      }
      dir.x = d.asDiagonal() * (At * dir.y - g);
      dir.zl.resize(n);
      dir.zu = Eigen::VectorXd::Zero(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        dir.zl[i] = (tl[i] - s.zl[i] * dir.x[i]) / sl[i];
        if (has_upper[static_cast<std::size_t>(i)])
          dir.zu[i] = (tu[i] + s.zu[i] * dir.x[i]) / su[i];
      }
    };

    // predictor
    State aff;
    {
      Eigen::VectorXd tl = -(sl.array() * s.zl.array()).matrix();
      Eigen::VectorXd tu = Eigen::VectorXd::Zero(n);
      for (Eigen::Index i = 0; i < n; ++i)
        if (has_upper[static_cast<std::size_t>(i)]) tu[i] = -su[i] * s.zu[i];
      solve_direction(tl, tu, rp, rd, aff);
    }

    Eigen::VectorXd neg_dx = -aff.x;
    const double ap_aff =
        std::min(step_limit(sl, aff.x, all), step_limit(su, neg_dx, has_upper));
    const double ad_aff =
        std::min(step_limit(s.zl, aff.zl, all), step_limit(s.zu, aff.zu, has_upper));

    double gap_aff = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      gap_aff += (sl[i] + ap_aff * aff.x[i]) * (s.zl[i] + ad_aff * aff.zl[i]);
      if (has_upper[static_cast<std::size_t>(i)])
        gap_aff += (su[i] - ap_aff * aff.x[i]) * (s.zu[i] + ad_aff * aff.zu[i]);
    }
    const double mu_aff = gap_aff / static_cast<double>(bound_count);
    double sigma = std::pow(mu_aff / std::max(mu, 1e-300), 3);
    sigma = std::clamp(sigma, 1e-8, 1.0 - 1e-8);

    // corrector
    State dir;
    {
      Eigen::VectorXd tl(n), tu = Eigen::VectorXd::Zero(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        tl[i] = sigma * mu - sl[i] * s.zl[i] - aff.x[i] * aff.zl[i];
        if (has_upper[static_cast<std::size_t>(i)])
          tu[i] = sigma * mu - su[i] * s.zu[i] + aff.x[i] * aff.zu[i];
      }
      solve_direction(tl, tu, rp, rd, dir);
    }

    neg_dx = -dir.x;
    const double ap =
        std::min(1.0, 0.99995 * std::min(step_limit(sl, dir.x, all),
                                         step_limit(su, neg_dx, has_upper)));
    const double ad =
        std::min(1.0, 0.99995 * std::min(step_limit(s.zl, dir.zl, all),
                                         step_limit(s.zu, dir.zu, has_upper)));

    s.x += ap * dir.x;
    s.y += ad * dir.y;
    s.zl += ad * dir.zl;
    s.zu += ad * dir.zu;
    for (Eigen::Index i = 0; i < n; ++i) {
      s.zl[i] = std::max(s.zl[i], 1e-300);
      if (has_upper[static_cast<std::size_t>(i)]) s.zu[i] = std::max(s.zu[i], 1e-300);
    }
  }

  out = best;
  out.objective = problem.c.dot(out.x);
  return out;
}

}  // namespace contestopt
