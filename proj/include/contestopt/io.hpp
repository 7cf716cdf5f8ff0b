#pragma once

#include <nlohmann/json_fwd.hpp>

#include <string>
#include <vector>

#include "contestopt/distribution.hpp"
#include "contestopt/mechanism.hpp"
#include "contestopt/nonlinear.hpp"
#include "contestopt/simulate.hpp"
#include "contestopt/solver.hpp"

namespace contestopt {

// Configuration error naming the offending field (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error("config field '" + field + "': " + what),
        field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

nlohmann::json to_json(const DistributionSpec& spec);
DistributionSpec distribution_from_json(const nlohmann::json& j);

nlohmann::json to_json(const MechanismPair& pair);
MechanismPair pair_from_json(const nlohmann::json& j);

nlohmann::json to_json(const RegionPartition& regions);
RegionPartition regions_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SolveResult& result);

// {"types":[...], "probs":[...], "Q":[...], "cost":{"family":...}}
DiscreteTypeModel discrete_model_from_json(const nlohmann::json& j);
CostSpec cost_from_json(const nlohmann::json& j);

struct ExperimentConfig {
  DistributionSpec spec = DistributionSpec::uniform(0.0, 1.0);
  int n = 2;
  int k = 1;
  double eta = 1.0;
  std::vector<double> alphas = {0.5};
  SolveMethod method = SolveMethod::Auto;
  Eigen::Index grid_cells = 2000;
  McConfig mc;
  std::string sweep_parameter;  // "n", "z" or "alpha" for cmd_sweep
  std::vector<double> sweep_values;
  double delta_epsilon = 0.1;

  SolveConfig solve_config(double alpha) const;
};

ExperimentConfig experiment_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment(const std::string& path);

// 12 significant digits; plot-friendly and stable across runs.
std::string csv_double(double v);

void write_text_file(const std::string& path, const std::string& body);

std::string curves_csv(const MechanismPair& pair, const DistributionSpec& spec,
                       const RegionPartition& regions);
std::string regions_csv(const RegionPartition& regions);
std::string interim_csv(const InterimEstimate& est, double max_deviation_gain);

}  // namespace contestopt
