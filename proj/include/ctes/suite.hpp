#pragma once

#include <string>
#include <vector>

#include "ctes/config.hpp"
#include "ctes/eval.hpp"

namespace ctes {

struct JobRecord {
  std::string method;
  double beta = -1.0;  // >= 0 only for sweep jobs
  double sigma = 0.0;
  int group = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
  std::string error;  // empty on success
};

struct SuiteResult {
  std::vector<ValidationReport> reports;
  std::vector<RiskEvalReport> risk;
  std::vector<ValidationReport> sweep;  // method holds "<method>@beta=<b>"
  std::vector<JobRecord> jobs;
  int failed = 0;
};

/// Dataset used for one (sigma, trial) cell of the grid.
PairedDataset suite_dataset(const ExperimentConfig& cfg, double sigma, int trial);

/// Per-job seed from the master seed and the job coordinates.
std::uint64_t job_seed(std::uint64_t master, const std::string& method, double sigma, int group,
                       int trial);

struct PlannedJob {
  MethodKind method = MethodKind::se_ctes;
  std::string label;   // method name, or "<method>@beta=<b>" for sweep jobs
  double beta = -1.0;  // >= 0 only for sweep jobs
  double sigma = 0.0;
  int group = 0;
  int trial = 0;
  std::uint64_t seed = 0;
};

/// The job grid in execution order: sigma, method, group, trial; sweep jobs
/// (sigma, beta, group, trial) follow when requested.
std::vector<PlannedJob> plan_suite(const ExperimentConfig& cfg, int num_groups, bool with_sweep);

/// Runs the (method x sigma x group x trial) grid and, when `with_sweep` is
/// set, the beta sweep. Writes CSV reports and manifest.json into cfg.output.
SuiteResult run_suite(const ExperimentConfig& cfg, bool with_sweep = false);

}  // namespace ctes
