#include "contestopt/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "contestopt/rng.hpp"

namespace contestopt {

namespace {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double effort(double s, double theta) { return std::max(0.0, s - theta); }

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

template <typename F>
MeanSe sample_mean(Eigen::Index count, const F& value) {
  double sum = 0.0, sumsq = 0.0;
  for (Eigen::Index i = 0; i < count; ++i) {
    const double v = value(i);
    sum += v;
    sumsq += v * v;
  }
  MeanSe out;
  out.mean = sum / static_cast<double>(count);
  const double var =
      std::max(0.0, sumsq / static_cast<double>(count) - out.mean * out.mean);
  out.se = std::sqrt(var / static_cast<double>(count));
  return out;
}

// opponent signals for one probe block, drawn once and reused across the
// deviation candidates (common random numbers)
Eigen::ArrayXd draw_opponent_signals(const DistributionSpec& spec,
                                     const SignalStrategy& strategy,
                                     Eigen::Index count, std::mt19937_64& rng) {
  Eigen::ArrayXd out(count);
  for (Eigen::Index i = 0; i < count; ++i)
    out[i] = strategy(spec.quantile(uniform01(rng)));
  return out;
}

}  // namespace

double SignalStrategy::operator()(double t) const {
  const Eigen::Index m = theta.size();
  if (t <= theta[0]) return s[0];
  if (t >= theta[m - 1]) return s[m - 1];
  const auto* begin = theta.data();
  const Eigen::Index j =
      std::upper_bound(begin, begin + m, t) - begin - 1;
  const double w = (t - theta[j]) / (theta[j + 1] - theta[j]);
  return (1.0 - w) * s[j] + w * s[j + 1];
}

SignalStrategy SignalStrategy::identity(const DistributionSpec& spec) {
  SignalStrategy st;
  st.theta = Eigen::ArrayXd::LinSpaced(2, spec.lower(), spec.upper());
  st.s = st.theta;
  return st;
}

SignalStrategy SignalStrategy::from_pair(const MechanismPair& pair) {
  SignalStrategy st;
  st.theta = pair.grid.points;
  st.s = equilibrium_signal_map(pair);
  return st;
}

Eigen::ArrayXd probe_types(const DistributionSpec& spec, int count) {
  if (count < 2) throw std::invalid_argument("need at least 2 probe types");
  Eigen::ArrayXd probes(count);
  for (int i = 0; i < count; ++i)
    probes[i] = spec.quantile(static_cast<double>(i) / (count - 1));
  return probes;
}

InterimEstimate mc_interim_estimate(const AllocationFn& rule, int n,
                                    const SignalStrategy& strategy,
                                    const DistributionSpec& spec, double eta,
                                    const McConfig& cfg) {
  if (cfg.samples < 1000) throw std::invalid_argument("sample count must be >= 1e3");
  InterimEstimate est;
  est.theta = probe_types(spec, cfg.probe_count);
  est.q_hat.resize(cfg.probe_count);
  est.q_se.resize(cfg.probe_count);
  est.u_hat.resize(cfg.probe_count);
  est.u_se.resize(cfg.probe_count);
  Eigen::ArrayXd opp(n - 1);
  for (int p = 0; p < cfg.probe_count; ++p) {
    auto rng = make_rng(cfg.seed, static_cast<std::uint64_t>(p));
    const double own = strategy(est.theta[p]);
    const MeanSe q = sample_mean(cfg.samples, [&](Eigen::Index) {
      for (Eigen::Index j = 0; j + 1 < n; ++j)
        opp[j] = strategy(spec.quantile(uniform01(rng)));
      return rule(own, opp);
    });
    est.q_hat[p] = q.mean;
    est.q_se[p] = q.se;
    est.u_hat[p] = q.mean - eta * effort(own, est.theta[p]);
    est.u_se[p] = q.se;
  }
  return est;
}

InterimEstimate mc_interim_estimate(const PairContestRule& rule,
                                    const SignalStrategy& strategy,
                                    const DistributionSpec& spec, double eta,
                                    const McConfig& cfg) {
  AllocationFn fn = [&](double own, const Eigen::Ref<const Eigen::ArrayXd>& opp) {
    return rule.win_probability(own, opp[0]);
  };
  return mc_interim_estimate(fn, 2, strategy, spec, eta, cfg);
}

InterimEstimate mc_interim_estimate(const CoarseRanking& ranking, int n, int k,
                                    const SignalStrategy& strategy,
                                    const DistributionSpec& spec, double eta,
                                    const McConfig& cfg) {
  Eigen::ArrayXd all(n);
  AllocationFn fn = [&, all](double own,
                             const Eigen::Ref<const Eigen::ArrayXd>& opp) mutable {
    all[0] = own;
    all.tail(n - 1) = opp;
    return contest_allocate(ranking, all, k)[0];
  };
  return mc_interim_estimate(fn, n, strategy, spec, eta, cfg);
}

DeviationReport deviation_scan(const AllocationFn& rule, int n,
                               const SignalStrategy& strategy,
                               const DistributionSpec& spec, double eta,
                               const McConfig& cfg) {
  const Eigen::ArrayXd probes = probe_types(spec, cfg.probe_count);
  const double s_top = spec.upper() + 1.0 / eta;
  const Eigen::ArrayXd candidates =
      Eigen::ArrayXd::LinSpaced(cfg.deviation_signals, 0.0, s_top);

  DeviationReport rep;
  rep.max_gain = -std::numeric_limits<double>::infinity();
  rep.certified = true;
  Eigen::MatrixXd opp(cfg.samples, n - 1);
  for (int p = 0; p < cfg.probe_count; ++p) {
    auto rng = make_rng(cfg.seed, 1000003ULL + static_cast<std::uint64_t>(p));
    for (Eigen::Index i = 0; i < cfg.samples; ++i)
      for (Eigen::Index j = 0; j + 1 < n; ++j)
        opp(i, j) = strategy(spec.quantile(uniform01(rng)));

    const double theta = probes[p];
    const double s_eq = strategy(theta);
    auto payoff = [&](double s, Eigen::Index i) {
      return rule(s, opp.row(i).array().transpose()) - eta * effort(s, theta);
    };

    double best_gain = -std::numeric_limits<double>::infinity();
    double best_signal = s_eq;
    for (Eigen::Index c = 0; c < candidates.size(); ++c) {
      double mean = 0.0;
      for (Eigen::Index i = 0; i < cfg.samples; ++i)
        mean += payoff(candidates[c], i) - payoff(s_eq, i);
      mean /= static_cast<double>(cfg.samples);
      if (mean > best_gain) {
        best_gain = mean;
        best_signal = candidates[c];
      }
    }
    const MeanSe diff = sample_mean(cfg.samples, [&](Eigen::Index i) {
      return payoff(best_signal, i) - payoff(s_eq, i);
    });
    if (diff.mean > 3.0 * diff.se + 1e-3) rep.certified = false;
    if (diff.mean > rep.max_gain) {
      rep.max_gain = diff.mean;
      rep.se_at_max = diff.se;
      rep.probe_theta = theta;
      rep.probe_signal = best_signal;
    }
  }
  return rep;
}

DeviationReport deviation_scan(const PairContestRule& rule,
                               const SignalStrategy& strategy,
                               const DistributionSpec& spec, double eta,
                               const McConfig& cfg) {
  const Eigen::ArrayXd probes = probe_types(spec, cfg.probe_count);
  const double s_top = spec.upper() + 1.0 / eta;
  const Eigen::ArrayXd candidates =
      Eigen::ArrayXd::LinSpaced(cfg.deviation_signals, 0.0, s_top);
  const auto& pools = rule.pools();

  DeviationReport rep;
  rep.max_gain = -std::numeric_limits<double>::infinity();
  rep.certified = true;

  for (int p = 0; p < cfg.probe_count; ++p) {
    auto rng = make_rng(cfg.seed, 1000003ULL + static_cast<std::uint64_t>(p));
    Eigen::ArrayXd sig = draw_opponent_signals(spec, strategy, cfg.samples, rng);

    std::vector<double> sorted(sig.data(), sig.data() + sig.size());
    std::sort(sorted.begin(), sorted.end());
    // pool-local sorted scores with prefix sums for the kernel average
    std::vector<std::vector<double>> pool_scores(pools.size());
    std::vector<std::vector<double>> pool_prefix(pools.size());
    std::vector<std::vector<double>> pool_signals(pools.size());
    for (Eigen::Index i = 0; i < sig.size(); ++i) {
      const int q = rule.pool_index(sig[i]);
      if (q >= 0) {
        pool_scores[static_cast<std::size_t>(q)].push_back(
            rule.score_at(q, sig[i]));
        pool_signals[static_cast<std::size_t>(q)].push_back(sig[i]);
      }
    }
    for (std::size_t q = 0; q < pools.size(); ++q) {
      std::sort(pool_scores[q].begin(), pool_scores[q].end());
      std::sort(pool_signals[q].begin(), pool_signals[q].end());
      pool_prefix[q].assign(pool_scores[q].size() + 1, 0.0);
      for (std::size_t i = 0; i < pool_scores[q].size(); ++i)
        pool_prefix[q][i + 1] = pool_prefix[q][i] + pool_scores[q][i];
    }

    auto mean_allocation = [&](double s) {
      const double count = static_cast<double>(sig.size());
      const Eigen::Index below =
          std::lower_bound(sorted.begin(), sorted.end(), s) - sorted.begin();
      const int q = rule.pool_index(s);
      if (q < 0) return static_cast<double>(below) / count;
      const auto& ps = pool_signals[static_cast<std::size_t>(q)];
      const Eigen::Index below_pool =
          std::lower_bound(ps.begin(), ps.end(), s) - ps.begin();
      const auto& sc = pool_scores[static_cast<std::size_t>(q)];
      const auto& pf = pool_prefix[static_cast<std::size_t>(q)];
      const double rho = rule.score_at(q, s);
      const Eigen::Index lo =
          std::lower_bound(sc.begin(), sc.end(), rho - 1.0) - sc.begin();
      const Eigen::Index hi =
          std::lower_bound(sc.begin(), sc.end(), rho + 1.0) - sc.begin();
      const double inside =
          0.5 * ((1.0 + rho) * static_cast<double>(hi - lo) - (pf[hi] - pf[lo]));
      const double pooled = static_cast<double>(lo) + inside;
      return (static_cast<double>(below - below_pool) + pooled) / count;
    };

    const double theta = probes[p];
    const double s_eq = strategy(theta);
    const double eq_payoff = mean_allocation(s_eq) - eta * effort(s_eq, theta);

    double best_gain = -std::numeric_limits<double>::infinity();
    double best_signal = s_eq;
    for (Eigen::Index c = 0; c < candidates.size(); ++c) {
      const double gain = mean_allocation(candidates[c]) -
                          eta * effort(candidates[c], theta) - eq_payoff;
      if (gain > best_gain) {
        best_gain = gain;
        best_signal = candidates[c];
      }
    }
    // per-sample variance of the paired difference at the best candidate
    const MeanSe diff = sample_mean(sig.size(), [&](Eigen::Index i) {
      const double dev = rule.win_probability(best_signal, sig[i]) -
                         eta * effort(best_signal, theta);
      const double eq = rule.win_probability(s_eq, sig[i]) -
                        eta * effort(s_eq, theta);
      return dev - eq;
    });
    if (best_gain > 3.0 * diff.se + 1e-3) rep.certified = false;
    if (best_gain > rep.max_gain) {
      rep.max_gain = best_gain;
      rep.se_at_max = diff.se;
      rep.probe_theta = theta;
      rep.probe_signal = best_signal;
    }
  }
  return rep;
}

InterimEstimate simulate_vcg(const DistributionSpec& spec, int n, int k,
                             double eta, const McConfig& cfg) {
  if (!(k > 0 && k < n)) throw std::invalid_argument("need 0 < k < n");
  if (cfg.samples < 1000) throw std::invalid_argument("sample count must be >= 1e3");
  InterimEstimate est;
  est.theta = probe_types(spec, cfg.probe_count);
  est.q_hat.resize(cfg.probe_count);
  est.q_se.resize(cfg.probe_count);
  est.u_hat.resize(cfg.probe_count);
  est.u_se.resize(cfg.probe_count);
  std::vector<double> opp(static_cast<std::size_t>(n - 1));
  for (int p = 0; p < cfg.probe_count; ++p) {
    auto rng = make_rng(cfg.seed, 2000003ULL + static_cast<std::uint64_t>(p));
    const double theta = est.theta[p];
    double qsum = 0.0, qsq = 0.0, usum = 0.0, usq = 0.0;
    for (Eigen::Index i = 0; i < cfg.samples; ++i) {
      for (auto& o : opp) o = spec.quantile(uniform01(rng));
      // threshold report: the k-th highest opponent
      std::nth_element(opp.begin(), opp.begin() + (k - 1), opp.end(),
                       std::greater<double>());
      const double thresh = opp[static_cast<std::size_t>(k - 1)];
      double q = 0.0, u = 0.0;
      if (theta > thresh) {
        // winners always clear the threshold: target - theta < 1/eta
        const double target = 1.0 / eta + thresh;
        q = 1.0;
        u = std::max(0.0, 1.0 - eta * effort(target, theta));
      }
      qsum += q;
      qsq += q * q;
      usum += u;
      usq += u * u;
    }
    const double N = static_cast<double>(cfg.samples);
    est.q_hat[p] = qsum / N;
    est.q_se[p] = std::sqrt(std::max(0.0, qsq / N - est.q_hat[p] * est.q_hat[p]) / N);
    est.u_hat[p] = usum / N;
    est.u_se[p] = std::sqrt(std::max(0.0, usq / N - est.u_hat[p] * est.u_hat[p]) / N);
  }
  return est;
}

}  // namespace contestopt
