#include "contestopt/io.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace contestopt {

using nlohmann::json;

namespace {

Eigen::ArrayXd array_from_json(const json& j, const std::string& field) {
  if (!j.is_array()) throw ConfigError(field, "expected an array of numbers");
  Eigen::ArrayXd out(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(field, "expected an array of numbers");
    out[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return out;
}

json array_to_json(const Eigen::ArrayXd& a) {
  json out = json::array();
  for (Eigen::Index i = 0; i < a.size(); ++i) out.push_back(a[i]);
  return out;
}

RegionTag tag_from_name(const std::string& name) {
  if (name == "no-tension") return RegionTag::NoTension;
  if (name == "no-effort") return RegionTag::NoEffort;
  if (name == "efficient") return RegionTag::Efficient;
  throw ConfigError("region.tag", "unknown tag '" + name + "'");
}

}  // namespace

json to_json(const DistributionSpec& spec) {
  json j;
  j["support"] = {spec.lower(), spec.upper()};
  switch (spec.family()) {
    case Family::Uniform:
      j["family"] = "uniform";
      break;
    case Family::Power:
      j["family"] = "power";
      j["p"] = spec.power_exponent();
      break;
    case Family::PiecewiseLinearCdf: {
      j["family"] = "piecewise_linear_cdf";
      json knots = json::array();
      for (const auto& k : spec.knots()) knots.push_back({k[0], k[1]});
      j["knots"] = knots;
      break;
    }
  }
  return j;
}

DistributionSpec distribution_from_json(const json& j) {
  if (!j.is_object() || !j.contains("family"))
    throw ConfigError("distribution.family", "missing");
  const std::string family = j["family"].get<std::string>();
  try {
    if (family == "piecewise_linear_cdf") {
      if (!j.contains("knots")) throw ConfigError("distribution.knots", "missing");
      std::vector<std::array<double, 2>> knots;
      for (const auto& k : j["knots"])
        knots.push_back({k.at(0).get<double>(), k.at(1).get<double>()});
      return DistributionSpec::piecewise_linear_cdf(std::move(knots));
    }
    double lo = 0.0, hi = 1.0;
    if (j.contains("support")) {
      lo = j["support"].at(0).get<double>();
      hi = j["support"].at(1).get<double>();
    }
    if (family == "uniform") return DistributionSpec::uniform(lo, hi);
    if (family == "power") {
      if (!j.contains("p")) throw ConfigError("distribution.p", "missing");
      return DistributionSpec::power(j["p"].get<double>(), lo, hi);
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError("distribution", e.what());
  }
  throw ConfigError("distribution.family", "unknown family '" + family + "'");
}

json to_json(const MechanismPair& pair) {
  json j;
  j["n"] = pair.n;
  j["k"] = pair.k;
  j["eta"] = pair.eta;
  j["alpha"] = pair.alpha;
  j["theta"] = array_to_json(pair.grid.points);
  j["weights"] = array_to_json(pair.grid.weights);
  j["Q"] = array_to_json(pair.Q);
  j["U"] = array_to_json(pair.U);
  return j;
}

MechanismPair pair_from_json(const json& j) {
  MechanismPair pair;
  pair.n = j.at("n").get<int>();
  pair.k = j.at("k").get<int>();
  pair.eta = j.at("eta").get<double>();
  pair.alpha = j.at("alpha").get<double>();
  pair.grid.points = array_from_json(j.at("theta"), "theta");
  pair.grid.weights = array_from_json(j.at("weights"), "weights");
  pair.Q = array_from_json(j.at("Q"), "Q");
  pair.U = array_from_json(j.at("U"), "U");
  if (pair.Q.size() != pair.grid.size() || pair.U.size() != pair.grid.size())
    throw ConfigError("Q/U", "curve lengths do not match the grid");
  return pair;
}

json to_json(const RegionPartition& regions) {
  json out = json::array();
  for (const auto& iv : regions.intervals)
    out.push_back({{"lo", iv.lo}, {"hi", iv.hi}, {"tag", region_tag_name(iv.tag)}});
  return out;
}

RegionPartition regions_from_json(const json& j) {
  RegionPartition out;
  for (const auto& iv : j)
    out.intervals.push_back({iv.at("lo").get<double>(), iv.at("hi").get<double>(),
                             tag_from_name(iv.at("tag").get<std::string>())});
  return out;
}

json to_json(const SolveResult& result) {
  json j;
  j["pair"] = to_json(result.pair);
  j["objective"] = result.objective;
  j["regions"] = to_json(result.regions);
  json d;
  d["method"] = result.diagnostics.method;
  d["theta1"] = result.diagnostics.theta1;
  d["theta2"] = result.diagnostics.theta2;
  d["binding_residual"] = result.diagnostics.binding_residual;
  d["objective_exact"] = result.diagnostics.objective_exact;
  d["lp_iterations"] = result.diagnostics.lp_iterations;
  d["lp_gap"] = result.diagnostics.lp_gap;
  d["feasibility_slack"] = result.diagnostics.feasibility_slack;
  j["diagnostics"] = d;
  return j;
}

DiscreteTypeModel discrete_model_from_json(const json& j) {
  DiscreteTypeModel model;
  model.types = array_from_json(j.at("types"), "types");
  model.probs = array_from_json(j.at("probs"), "probs");
  model.Q = array_from_json(j.at("Q"), "Q");
  try {
    model.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("discrete_model", e.what());
  }
  return model;
}

CostSpec cost_from_json(const json& j) {
  const std::string family = j.at("family").get<std::string>();
  const double c = j.contains("c") ? j["c"].get<double>() : 1.0;
  try {
    if (family == "linear") return CostSpec::linear(c);
    if (family == "quadratic") return CostSpec::quadratic(c);
    if (family == "power")
      return CostSpec::power(c, j.at("p").get<double>());
  } catch (const std::invalid_argument& e) {
    throw ConfigError("cost", e.what());
  }
  throw ConfigError("cost.family", "unknown family '" + family + "'");
}

SolveConfig ExperimentConfig::solve_config(double alpha) const {
  SolveConfig c;
  c.spec = spec;
  c.n = n;
  c.k = k;
  c.eta = eta;
  c.alpha = alpha;
  c.grid_cells = grid_cells;
  c.method = method;
  return c;
}

ExperimentConfig experiment_from_json(const json& j) {
  ExperimentConfig cfg;
  if (!j.is_object()) throw ConfigError("root", "expected a JSON object");
  if (!j.contains("distribution")) throw ConfigError("distribution", "missing");
  cfg.spec = distribution_from_json(j["distribution"]);
  cfg.n = j.value("n", 2);
  cfg.k = j.value("k", 1);
  cfg.eta = j.value("eta", 1.0);
  if (!(cfg.n > 1)) throw ConfigError("n", "need at least 2 agents");
  if (!(cfg.k > 0 && cfg.k < cfg.n)) throw ConfigError("k", "need 0 < k < n");
  if (!(cfg.eta > 0.0)) throw ConfigError("eta", "must be positive");

  cfg.alphas.clear();
  if (j.contains("alpha")) {
    if (j["alpha"].is_array()) {
      for (const auto& a : j["alpha"]) cfg.alphas.push_back(a.get<double>());
    } else {
      cfg.alphas.push_back(j["alpha"].get<double>());
    }
  } else {
    cfg.alphas.push_back(0.5);
  }
  for (double a : cfg.alphas)
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("alpha", "must lie in [0, 1]");

  const std::string method = j.value("method", std::string("auto"));
  if (method == "lp") {
    cfg.method = SolveMethod::Lp;
  } else if (method == "closed-form") {
    cfg.method = SolveMethod::ConvexClosedForm;
  } else if (method == "auto") {
    cfg.method = SolveMethod::Auto;
  } else {
    throw ConfigError("method", "expected lp | closed-form | auto");
  }

  cfg.grid_cells = j.value("grid", 2000);
  if (cfg.grid_cells < 100) throw ConfigError("grid", "need at least 100 cells");

  if (j.contains("mc")) {
    const auto& mc = j["mc"];
    cfg.mc.samples = mc.value("samples", cfg.mc.samples);
    cfg.mc.seed = mc.value("seed", cfg.mc.seed);
    cfg.mc.probe_count = mc.value("probes", cfg.mc.probe_count);
    cfg.mc.deviation_signals =
        mc.value("deviation_signals", cfg.mc.deviation_signals);
    if (cfg.mc.samples < 1000) throw ConfigError("mc.samples", "must be >= 1e3");
    if (cfg.mc.probe_count < 2) throw ConfigError("mc.probes", "need at least 2");
  }

  if (j.contains("sweep")) {
    const auto& sw = j["sweep"];
    cfg.sweep_parameter = sw.value("parameter", std::string());
    if (cfg.sweep_parameter != "n" && cfg.sweep_parameter != "z" &&
        cfg.sweep_parameter != "alpha")
      throw ConfigError("sweep.parameter", "expected n | z | alpha");
    if (!sw.contains("values") || !sw["values"].is_array() || sw["values"].empty())
      throw ConfigError("sweep.values", "need a non-empty array");
    for (const auto& v : sw["values"]) cfg.sweep_values.push_back(v.get<double>());
  }

  cfg.delta_epsilon = j.value("delta_epsilon", 0.1);
  if (!(cfg.delta_epsilon > 0.0)) throw ConfigError("delta_epsilon", "must be positive");
  return cfg;
}

ExperimentConfig load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("malformed JSON: ") + e.what());
  }
  return experiment_from_json(j);
}

std::string csv_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << body;
}

std::string curves_csv(const MechanismPair& pair, const DistributionSpec& spec,
                       const RegionPartition& regions) {
  const Eigen::ArrayXd qe =
      efficient_allocation_curve(spec, pair.n, pair.k, pair.grid.points);
  auto tag_at = [&](double theta) {
    for (const auto& iv : regions.intervals)
      if (theta < iv.hi || &iv == &regions.intervals.back())
        return region_tag_name(iv.tag);
    return region_tag_name(regions.intervals.back().tag);
  };
  std::ostringstream os;
  os << "theta,Q,U,Q_E,region\n";
  for (Eigen::Index j = 0; j < pair.grid.size(); ++j) {
    os << csv_double(pair.grid.points[j]) << ',' << csv_double(pair.Q[j]) << ','
       << csv_double(pair.U[j]) << ',' << csv_double(qe[j]) << ','
       << tag_at(pair.grid.points[j]) << '\n';
  }
  return os.str();
}

std::string regions_csv(const RegionPartition& regions) {
  std::ostringstream os;
  os << "lo,hi,tag\n";
  for (const auto& iv : regions.intervals)
    os << csv_double(iv.lo) << ',' << csv_double(iv.hi) << ','
       << region_tag_name(iv.tag) << '\n';
  return os.str();
}

std::string interim_csv(const InterimEstimate& est, double max_deviation_gain) {
  std::ostringstream os;
  os << "theta,Q_hat,Q_se,U_hat,U_se,max_deviation_gain\n";
  for (Eigen::Index i = 0; i < est.theta.size(); ++i) {
    os << csv_double(est.theta[i]) << ',' << csv_double(est.q_hat[i]) << ','
       << csv_double(est.q_se[i]) << ',' << csv_double(est.u_hat[i]) << ','
       << csv_double(est.u_se[i]) << ','
       << (i == 0 ? csv_double(max_deviation_gain) : std::string()) << '\n';
  }
  return os.str();
}

}  // namespace contestopt
