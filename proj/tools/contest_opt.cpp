#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>
#include <vector>

#include "contestopt/baselines.hpp"
#include "contestopt/coarse_ranking.hpp"
#include "contestopt/io.hpp"
#include "contestopt/simulate.hpp"
#include "contestopt/solver.hpp"

namespace co = contestopt;
using nlohmann::json;

namespace {

int thread_cap() {
  if (const char* env = std::getenv("CONTEST_OPT_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// run fn(i) for i in [0, count) on up to thread_cap() workers
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  const int workers = std::min<int>(thread_cap(), static_cast<int>(count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

void write_atomic(const std::filesystem::path& path, const std::string& body) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  co::write_text_file(tmp.string(), body);
  std::filesystem::rename(tmp, path);
}

std::string alpha_suffix(const co::ExperimentConfig& cfg, std::size_t i) {
  if (cfg.alphas.size() <= 1) return "";
  std::ostringstream os;
  os << "_alpha" << cfg.alphas[i];
  return os.str();
}

json result_document(const co::ExperimentConfig& cfg, double alpha,
                     const co::SolveResult& result) {
  json doc;
  doc["distribution"] = co::to_json(cfg.spec);
  doc["alpha"] = alpha;
  doc["result"] = co::to_json(result);
  return doc;
}

int cmd_solve(const co::ExperimentConfig& cfg, const std::filesystem::path& out) {
  std::filesystem::create_directories(out);
  std::vector<co::SolveResult> results(cfg.alphas.size());
  parallel_for(cfg.alphas.size(), [&](std::size_t i) {
    results[i] = co::solve(cfg.solve_config(cfg.alphas[i]));
  });
  for (std::size_t i = 0; i < cfg.alphas.size(); ++i) {
    const std::string suffix = alpha_suffix(cfg, i);
    write_atomic(out / ("result" + suffix + ".json"),
                 result_document(cfg, cfg.alphas[i], results[i]).dump(2) + "\n");
    write_atomic(out / ("curves" + suffix + ".csv"),
                 co::curves_csv(results[i].pair, cfg.spec, results[i].regions));
    write_atomic(out / ("regions" + suffix + ".csv"),
                 co::regions_csv(results[i].regions));
  }
  return 0;
}

int cmd_compare(const co::ExperimentConfig& cfg, const std::filesystem::path& out) {
  std::filesystem::create_directories(out);
  std::ostringstream os;
  os << "mechanism,alpha,efficiency,total_utility,objective,ratio_opt_wta,delta_bound\n";
  for (double alpha : cfg.alphas) {
    const co::SolveResult opt = co::solve(cfg.solve_config(alpha));
    const co::TypeGrid& grid = opt.pair.grid;
    co::MechanismPair wta = co::wta_pair(cfg.spec, grid, cfg.n, cfg.k, cfg.eta, alpha);

    co::MechanismPair vcg = wta;
    for (Eigen::Index j = 0; j < grid.size(); ++j)
      vcg.U[j] = co::vcg_interim_utility(cfg.spec, cfg.n, cfg.k, cfg.eta,
                                         grid.points[j]);

    const double n = cfg.n;
    auto emit = [&](const std::string& name, const co::MechanismPair& pair,
                    double objective) {
      const double eff = n * (grid.weights * grid.points * pair.Q).sum();
      const double util = n * (grid.weights * pair.U).sum();
      const double ratio = objective / (n * co::objective_value(wta));
      const double delta =
          co::nonconvergence_bound(cfg.spec.upper(), alpha, cfg.delta_epsilon).delta;
      os << name << ',' << co::csv_double(alpha) << ',' << co::csv_double(eff)
         << ',' << co::csv_double(util) << ',' << co::csv_double(objective)
         << ',' << co::csv_double(ratio) << ',' << co::csv_double(delta) << '\n';
    };
    emit("optimal", opt.pair, n * opt.objective);
    emit("wta", wta, n * co::objective_value(wta));
    emit("vcg-format", vcg, n * co::objective_value(vcg));
  }
  write_atomic(out / "compare.csv", os.str());
  return 0;
}

int cmd_sweep(const co::ExperimentConfig& cfg, const std::filesystem::path& out) {
  if (cfg.sweep_parameter.empty())
    throw co::ConfigError("sweep.parameter", "required for the sweep command");
  std::filesystem::create_directories(out);

  struct Row {
    double value = 0.0;
    co::SolveConfig solve;
  };
  std::vector<Row> rows;
  for (double v : cfg.sweep_values) {
    Row row;
    row.value = v;
    row.solve = cfg.solve_config(cfg.alphas.front());
    if (cfg.sweep_parameter == "n") {
      row.solve.n = static_cast<int>(v);
    } else if (cfg.sweep_parameter == "z") {
      row.solve = co::replicate_economy(row.solve, static_cast<int>(v));
    } else {
      row.solve.alpha = v;
    }
    rows.push_back(row);
  }

  std::vector<co::SolveResult> results(rows.size());
  parallel_for(rows.size(), [&](std::size_t i) { results[i] = co::solve(rows[i].solve); });

  std::ostringstream os;
  os << "parameter,value,alpha,n,k,objective,objective_wta,ratio,"
        "no_tension_measure,no_effort_lo,no_effort_hi,theta_c,efficiency,utility\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& res = results[i];
    const auto& sc = rows[i].solve;
    const co::MechanismPair wta =
        co::wta_pair(cfg.spec, res.pair.grid, sc.n, sc.k, sc.eta, sc.alpha);
    double ne_lo = std::numeric_limits<double>::quiet_NaN();
    double ne_hi = std::numeric_limits<double>::quiet_NaN();
    for (const auto& iv : res.regions.intervals)
      if (iv.tag == co::RegionTag::NoEffort) {
        ne_lo = iv.lo;
        ne_hi = iv.hi;
        break;
      }
    os << cfg.sweep_parameter << ',' << co::csv_double(rows[i].value) << ','
       << co::csv_double(sc.alpha) << ',' << sc.n << ',' << sc.k << ','
       << co::csv_double(res.objective) << ','
       << co::csv_double(co::objective_value(wta)) << ','
       << co::csv_double(res.objective / co::objective_value(wta)) << ','
       << co::csv_double(co::region_measure(res.regions, cfg.spec,
                                            co::RegionTag::NoTension))
       << ',' << co::csv_double(ne_lo) << ',' << co::csv_double(ne_hi) << ','
       << co::csv_double(co::cutoff_type(cfg.spec, sc.n, sc.k)) << ','
       << co::csv_double((res.pair.grid.weights * res.pair.grid.points * res.pair.Q).sum())
       << ',' << co::csv_double((res.pair.grid.weights * res.pair.U).sum())
       << '\n';
  }
  write_atomic(out / "sweep.csv", os.str());
  return 0;
}

int cmd_verify(const std::filesystem::path& result_path) {
  std::ifstream in(result_path);
  if (!in) throw co::ConfigError("result", "cannot open '" + result_path.string() + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw co::ConfigError("result", std::string("malformed JSON: ") + e.what());
  }
  const co::DistributionSpec spec = co::distribution_from_json(doc.at("distribution"));
  const co::MechanismPair pair = co::pair_from_json(doc.at("result").at("pair"));

  bool ok = true;
  const co::IcReport ic = co::check_ic(pair);
  std::cout << "ic: " << (ic.pass ? "pass" : "FAIL")
            << " (level " << ic.worst_level << ", slope ["
            << -ic.worst_slope_low << ", " << ic.worst_slope_high
            << "], binding " << ic.worst_binding << ")\n";
  ok = ok && ic.pass;

  const co::FeasibilityReport feas = co::check_interim_feasibility(
      pair.Q, pair.grid, spec, pair.n, pair.k, 1e-6);
  std::cout << "feasibility: " << (feas.pass ? "pass" : "FAIL")
            << " (worst slack " << feas.worst_slack << " at theta "
            << feas.worst_theta << ")\n";
  ok = ok && feas.pass;

  if (pair.n == 2 && pair.k == 1) {
    const co::PairContestRule rule = co::PairContestRule::build(pair, spec);
    co::McConfig mc;
    mc.samples = 20000;
    mc.probe_count = 21;
    mc.deviation_signals = 101;
    const co::DeviationReport dev =
        co::deviation_scan(rule, co::SignalStrategy::from_pair(pair), spec,
                           pair.eta, mc);
    std::cout << "deviation scan: " << (dev.certified ? "pass" : "FAIL")
              << " (max gain " << dev.max_gain << " at theta "
              << dev.probe_theta << ")\n";
    ok = ok && dev.certified;
  } else {
    std::cout << "deviation scan: skipped (ex-post rule built for n=2, k=1)\n";
  }
  return ok ? 0 : 1;
}

int cmd_simulate(const co::ExperimentConfig& cfg, const std::filesystem::path& out) {
  std::filesystem::create_directories(out);
  const double alpha = cfg.alphas.front();

  const co::InterimEstimate vcg =
      co::simulate_vcg(cfg.spec, cfg.n, cfg.k, cfg.eta, cfg.mc);
  write_atomic(out / "vcg_mc.csv", co::interim_csv(vcg, 0.0));

  if (cfg.n == 2 && cfg.k == 1) {
    const co::SolveResult res = co::solve(cfg.solve_config(alpha));
    const co::PairContestRule rule =
        co::PairContestRule::build(res.pair, cfg.spec, res.regions);
    const co::SignalStrategy strat = co::SignalStrategy::from_pair(res.pair);
    const co::InterimEstimate est =
        co::mc_interim_estimate(rule, strat, cfg.spec, cfg.eta, cfg.mc);
    const co::DeviationReport dev =
        co::deviation_scan(rule, strat, cfg.spec, cfg.eta, cfg.mc);
    write_atomic(out / "optimal_mc.csv", co::interim_csv(est, dev.max_gain));
    if (!dev.certified) {
      std::cerr << "deviation scan found gain " << dev.max_gain << " at theta "
                << dev.probe_theta << "\n";
      return 1;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"welfare-optimal screening contests: solver, baselines, verification"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::string result_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  std::optional<Eigen::Index> grid;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    if (needs_config)
      cmd->add_option("--config", config_path, "experiment config JSON")->required();
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--seed", seed, "Monte Carlo master seed");
    cmd->add_option("--method", method, "lp | closed-form | auto");
    cmd->add_option("--grid", grid, "grid cells");
  };

  CLI::App* solve = app.add_subcommand("solve", "solve the optimal contest");
  add_common(solve, true);
  CLI::App* compare =
      app.add_subcommand("compare", "optimal vs WTA and VCG-format objectives");
  add_common(compare, true);
  CLI::App* sweep = app.add_subcommand("sweep", "sweep n, z or alpha");
  add_common(sweep, true);
  CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo verification");
  add_common(simulate, true);
  CLI::App* verify = app.add_subcommand("verify", "re-check a solve result");
  verify->add_option("--result", result_path, "result.json from solve")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(verify)) return cmd_verify(result_path);

    co::ExperimentConfig cfg = co::load_experiment(config_path);
    if (seed) cfg.mc.seed = *seed;
    if (grid) {
      if (*grid < 100) throw co::ConfigError("grid", "need at least 100 cells");
      cfg.grid_cells = *grid;
    }
    if (method) {
      if (*method == "lp") cfg.method = co::SolveMethod::Lp;
      else if (*method == "closed-form") cfg.method = co::SolveMethod::ConvexClosedForm;
      else if (*method == "auto") cfg.method = co::SolveMethod::Auto;
      else throw co::ConfigError("method", "expected lp | closed-form | auto");
    }

    if (app.got_subcommand(solve)) return cmd_solve(cfg, out_dir);
    if (app.got_subcommand(compare)) return cmd_compare(cfg, out_dir);
    if (app.got_subcommand(sweep)) return cmd_sweep(cfg, out_dir);
    if (app.got_subcommand(simulate)) return cmd_simulate(cfg, out_dir);
  } catch (const co::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
