#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctes/baselines.hpp"
#include "ctes/classifier.hpp"
#include "ctes/datagen.hpp"
#include "ctes/eval.hpp"
#include "ctes/methods.hpp"

namespace ctes {

enum class Study { multivariate, scalar_to_matrix, tabular_risk };

std::string to_string(Study s);

struct BetaSweep {
  bool enabled = true;
  std::vector<double> betas{0.5, 0.6, 0.7, 0.8, 0.9};
  std::string method = "se-ctes";
};

struct ExperimentConfig {
  Study study = Study::multivariate;
  std::uint64_t seed = 0;
  std::vector<double> sigmas{0.01, 0.03, 0.05, 0.07, 0.09};
  /// Groups to identify; empty means every group.
  std::vector<int> groups{2, 3, 4};
  int trials = 5;
  int replicates = 5;
  /// Draw a fresh dataset for every trial instead of one per sigma.
  bool redraw_data = true;
  bool subsample_merged = true;
  std::vector<std::string> methods{"pls", "grnn", "cgan", "gan-cls", "ctes", "se-ctes"};
  int workers = 1;
  std::string output = "results";

  SimConfig sim;
  GpSimConfig gp;
  std::string tabular_path;
  int tabular_bins = 6;

  TrainConfig train;
  int k = 5;
  int h = 2;
  ForestConfig forest;
  CnnClassifierConfig cnn;
  int pls_components = 0;
  std::optional<double> grnn_bandwidth;
  BetaSweep beta_sweep;

  /// Throws ConfigError naming the offending field.
  void validate() const;

  MethodSettings method_settings() const;
  EvalSettings eval_settings() const;
};

/// Missing fields take their defaults; unknown fields are rejected.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig parse_config_file(const std::string& path);

nlohmann::json to_json(const ExperimentConfig& cfg);

}  // namespace ctes
