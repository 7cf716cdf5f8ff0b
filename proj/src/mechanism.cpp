#include "contestopt/mechanism.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace contestopt {

namespace {

void require_monotone(const Eigen::Ref<const Eigen::ArrayXd>& Q, double tol) {
  for (Eigen::Index j = 1; j < Q.size(); ++j)
    if (Q[j] < Q[j - 1] - tol)
      throw std::invalid_argument(
          "allocation curve is not monotone; apply monotone_rearrangement first");
}

}  // namespace

Eigen::ArrayXd canonical_utility(const Eigen::Ref<const Eigen::ArrayXd>& points,
                                 const Eigen::Ref<const Eigen::ArrayXd>& Q,
                                 double eta, double u_low) {
  if (points.size() != Q.size())
    throw std::invalid_argument("points and Q must share a grid");
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
  require_monotone(Q, 1e-12);
  if (u_low > Q[0] + 1e-12)
    throw std::invalid_argument("lowest-type utility exceeds Q at the lower end");
  Eigen::ArrayXd U(Q.size());
  U[0] = std::min(u_low, Q[0]);
  for (Eigen::Index j = 1; j < Q.size(); ++j)
    U[j] = std::min(U[j - 1] + eta * (points[j] - points[j - 1]), Q[j]);
  return U;
}

IcReport check_ic(const MechanismPair& pair, double level_tol,
                  double slope_tol) {
  const double eta = pair.eta;
  if (level_tol < 0.0) level_tol = default_level_tol(eta);
  if (slope_tol < 0.0) slope_tol = default_slope_tol(eta);
  const auto& th = pair.grid.points;
  if (pair.Q.size() != th.size() || pair.U.size() != th.size())
    throw std::invalid_argument("curve sizes do not match the grid");

  IcReport rep;
  rep.worst_level = (pair.U - pair.Q).maxCoeff();
  for (Eigen::Index j = 0; j + 1 < th.size(); ++j) {
    const double slope = (pair.U[j + 1] - pair.U[j]) / (th[j + 1] - th[j]);
    rep.worst_slope_low = std::max(rep.worst_slope_low, -slope);
    rep.worst_slope_high = std::max(rep.worst_slope_high, slope - eta);
    const double gap =
        std::min(pair.Q[j] - pair.U[j], pair.Q[j + 1] - pair.U[j + 1]);
    if (gap > level_tol)
      rep.worst_binding = std::max(rep.worst_binding, eta - slope);
  }
  rep.worst_level = std::max(rep.worst_level, 0.0);
  rep.worst_slope_low = std::max(rep.worst_slope_low, 0.0);
  rep.worst_slope_high = std::max(rep.worst_slope_high, 0.0);
  rep.pass = rep.worst_level <= level_tol && rep.worst_slope_low <= slope_tol &&
             rep.worst_slope_high <= slope_tol && rep.worst_binding <= slope_tol;
  return rep;
}

FeasibilityReport check_interim_feasibility(
    const Eigen::Ref<const Eigen::ArrayXd>& Q, const TypeGrid& grid,
    const DistributionSpec& spec, int n, int k, double tol) {
  if (Q.size() != grid.size())
    throw std::invalid_argument("allocation curve does not match the grid");
  require_monotone(Q, 1e-12);
  const Eigen::ArrayXd qe = efficient_allocation_curve(spec, n, k, grid.points);
  FeasibilityReport rep;
  rep.worst_slack = -std::numeric_limits<double>::infinity();
  // own grid point enters at half weight so the sum tracks the integral
  // from theta_j (not from the cell below it)
  double tail = 0.0, tail_e = 0.0;
  for (Eigen::Index j = Q.size() - 1; j >= 0; --j) {
    tail += 0.5 * grid.weights[j] * Q[j];
    tail_e += 0.5 * grid.weights[j] * qe[j];
    const double slack = tail - tail_e;
    if (slack > rep.worst_slack) {
      rep.worst_slack = slack;
      rep.worst_theta = grid.points[j];
    }
    tail += 0.5 * grid.weights[j] * Q[j];
    tail_e += 0.5 * grid.weights[j] * qe[j];
  }
  rep.pass = rep.worst_slack <= tol;
  return rep;
}

Eigen::ArrayXd monotone_rearrangement(const Eigen::Ref<const Eigen::ArrayXd>& Q,
                                      const TypeGrid& grid) {
  const Eigen::Index m = Q.size();
  if (m != grid.size())
    throw std::invalid_argument("allocation curve does not match the grid");
  std::vector<Eigen::Index> order(m);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return Q[a] < Q[b]; });
  // cumulative mass of the sorted value distribution
  Eigen::ArrayXd cum(m);
  double acc = 0.0;
  for (Eigen::Index l = 0; l < m; ++l) {
    acc += grid.weights[order[l]];
    cum[l] = acc;
  }
  Eigen::ArrayXd out(m);
  Eigen::Index l = 0;
  double pos = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) {
    const double mid = pos + 0.5 * grid.weights[j];  // own mass midpoint
    while (l + 1 < m && cum[l] < mid) ++l;
    out[j] = Q[order[l]];
    pos += grid.weights[j];
  }
  return out;
}

std::string region_tag_name(RegionTag tag) {
  switch (tag) {
    case RegionTag::NoTension: return "no-tension";
    case RegionTag::NoEffort: return "no-effort";
    case RegionTag::Efficient: return "efficient";
  }
  return "?";
}

RegionPartition classify_regions(const MechanismPair& pair,
                                 const DistributionSpec& spec,
                                 ClassifyTolerances tols) {
  const double eta = pair.eta;
  if (tols.level < 0.0) tols.level = default_level_tol(eta);
  if (tols.slope < 0.0) tols.slope = default_slope_tol(eta);
  const auto& th = pair.grid.points;
  const Eigen::Index cells = pair.grid.cells();
  const Eigen::ArrayXd qe =
      efficient_allocation_curve(spec, pair.n, pair.k, th);

  // Cell tags, decisive where possible. A strict U < Q gap means efficient;
  // a utility slope clearly below eta rules out the no-effort regime; at
  // slope eta the allocation's distance to the efficient rule decides.
  // Cells that none of those pin down (slope at eta with Q at Q_E, e.g. the
  // crossing of a pooled segment with Q_E, or an entire uniform benchmark)
  // stay ambiguous and attach to the interval on their left.
  enum class CellTag { NoTension, NoEffort, Efficient, Ambiguous };
  auto raw_tag = [&](Eigen::Index j) {
    const double u_gap =
        std::min(pair.Q[j] - pair.U[j], pair.Q[j + 1] - pair.U[j + 1]);
    if (u_gap > tols.level) return CellTag::Efficient;
    const double slope = (pair.U[j + 1] - pair.U[j]) / (th[j + 1] - th[j]);
    if (slope < eta - tols.slope) return CellTag::NoTension;
    const double e_gap = std::max(std::abs(pair.Q[j] - qe[j]),
                                  std::abs(pair.Q[j + 1] - qe[j + 1]));
    if (e_gap > tols.level) return CellTag::NoEffort;
    return CellTag::Ambiguous;
  };

  std::vector<CellTag> cell_tag(cells);
  for (Eigen::Index j = 0; j < cells; ++j) cell_tag[j] = raw_tag(j);
  {
    CellTag carry = CellTag::Ambiguous;
    for (Eigen::Index j = 0; j < cells; ++j) {
      if (cell_tag[j] == CellTag::Ambiguous) {
        cell_tag[j] = carry;
      } else {
        carry = cell_tag[j];
      }
    }
    // a leading ambiguous block attaches to the first decisive interval
    carry = CellTag::NoTension;
    for (Eigen::Index j = cells - 1; j >= 0; --j) {
      if (cell_tag[j] == CellTag::Ambiguous) {
        cell_tag[j] = carry;
      } else {
        carry = cell_tag[j];
      }
    }
  }
  std::vector<RegionTag> tag(cells);
  for (Eigen::Index j = 0; j < cells; ++j)
    tag[j] = static_cast<RegionTag>(cell_tag[j]);

  // runs of identical tags; short runs are tolerance artifacts at cutoffs
  // and fold into the interval on their left
  struct Run {
    Eigen::Index begin, end;  // cell range [begin, end)
    RegionTag tag;
  };
  std::vector<Run> runs;
  for (Eigen::Index j = 0; j < cells; ++j) {
    if (!runs.empty() && runs.back().tag == tag[j]) {
      runs.back().end = j + 1;
    } else {
      runs.push_back({j, j + 1, tag[j]});
    }
  }
  for (bool merged = true; merged && runs.size() > 1;) {
    merged = false;
    for (std::size_t r = 0; r < runs.size(); ++r) {
      if (runs[r].end - runs[r].begin >= tols.min_run_cells) continue;
      const std::size_t into = r > 0 ? r - 1 : r + 1;
      runs[into].begin = std::min(runs[into].begin, runs[r].begin);
      runs[into].end = std::max(runs[into].end, runs[r].end);
      runs.erase(runs.begin() + static_cast<std::ptrdiff_t>(r));
      // re-merge neighbours that now share a tag
      for (std::size_t s = 0; s + 1 < runs.size();) {
        if (runs[s].tag == runs[s + 1].tag) {
          runs[s].end = runs[s + 1].end;
          runs.erase(runs.begin() + static_cast<std::ptrdiff_t>(s) + 1);
        } else {
          ++s;
        }
      }
      merged = true;
      break;
    }
  }
  if (runs.size() > 64)
    throw std::runtime_error("region partition overflow: more than 64 intervals detected");

  auto fail = [&](const Run& run, const std::string& what, double value) {
    std::ostringstream os;
    os << "region classification error on [" << th[run.begin] << ", "
       << th[run.end] << ") tagged " << region_tag_name(run.tag) << ": " << what
       << " = " << value;
    throw std::runtime_error(os.str());
  };

  for (const auto& run : runs) {
    // skip one boundary cell on each side: cutoff cells mix two regimes
    const Eigen::Index a = run.begin + (run.end - run.begin > 2 ? 1 : 0);
    const Eigen::Index b = run.end - (run.end - run.begin > 2 ? 1 : 0);
    if (run.tag == RegionTag::NoEffort || run.tag == RegionTag::Efficient) {
      for (Eigen::Index j = a; j < b; ++j) {
        const double slope = (pair.U[j + 1] - pair.U[j]) / (th[j + 1] - th[j]);
        if (std::abs(slope - eta) > tols.slope)
          fail(run, "utility slope away from eta", slope);
      }
    }
    if (run.tag == RegionTag::Efficient) {
      for (Eigen::Index j = a; j < b; ++j)
        if (std::abs(pair.Q[j] - qe[j]) > tols.level)
          fail(run, "allocation away from the efficient rule", pair.Q[j] - qe[j]);
    }
    if (run.tag == RegionTag::NoEffort) {
      // interval integral of Q - Q_E should vanish; cells inside the level
      // tolerance band are boundary-attribution noise and earn an allowance
      double residual = 0.0, allowance = tols.binding;
      for (Eigen::Index j = run.begin; j <= run.end; ++j) {
        const double gap = pair.Q[j] - qe[j];
        residual += pair.grid.weights[j] * gap;
        allowance += pair.grid.weights[j] *
                     std::min(std::abs(gap), 4.0 * tols.level);
      }
      if (std::abs(residual) > allowance)
        fail(run, "no-effort interval integral not binding", residual);
    }
  }

  RegionPartition out;
  for (const auto& run : runs)
    out.intervals.push_back({th[run.begin], th[run.end], run.tag});
  return out;
}

double region_measure(const RegionPartition& regions,
                      const DistributionSpec& spec, RegionTag tag) {
  double m = 0.0;
  for (const auto& iv : regions.intervals)
    if (iv.tag == tag) m += spec.cdf(iv.hi) - spec.cdf(iv.lo);
  return m;
}

Eigen::ArrayXd equilibrium_signal_map(const MechanismPair& pair) {
  const IcReport rep = check_ic(pair);
  if (!rep.pass)
    throw std::invalid_argument("equilibrium signal map requires an incentive-compatible pair");
  return pair.grid.points + (pair.Q - pair.U) / pair.eta;
}

}  // namespace contestopt
