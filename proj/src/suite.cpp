#include "ctes/suite.hpp"

#include <bit>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <algorithm>
#include <map>

#include "ctes/errors.hpp"
#include "ctes/log.hpp"
#include "ctes/parallel.hpp"

namespace ctes {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t job_seed(std::uint64_t master, const std::string& method, double sigma, int group,
                       int trial) {
  return derive_seed(master, {fnv1a(method), std::bit_cast<std::uint64_t>(sigma),
                              std::uint64_t(group), std::uint64_t(trial)});
}

PairedDataset suite_dataset(const ExperimentConfig& cfg, double sigma, int trial) {
  const std::uint64_t key = derive_seed(
      cfg.seed, {fnv1a("data"), std::bit_cast<std::uint64_t>(sigma),
                 std::uint64_t(cfg.redraw_data ? trial : 0)});
  switch (cfg.study) {
    case Study::multivariate: {
      SimConfig s = cfg.sim;
      s.sigma = sigma;
      s.seed = key;
      return gen_multivariate_dataset(s);
    }
    case Study::scalar_to_matrix: {
      GpSimConfig g = cfg.gp;
      g.seed = key;
      return gen_scalar_to_matrix_dataset(g);
    }
    case Study::tabular_risk: {
      PairedDataset d = read_csv(cfg.tabular_path);
      if (!d.outcome) throw InputError(cfg.tabular_path + ": the tabular-risk study needs an outcome column");
      d.characteristics = discretize_continuous_columns(d.characteristics, cfg.tabular_bins);
      d.expressions = discretize_continuous_columns(d.expressions, cfg.tabular_bins);
      return d;
    }
  }
  throw ConfigError("unknown study");
}

namespace {

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_sweep_csv(const std::vector<ValidationReport>& reports, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << "beta,method,sigma,group,A1,A1_std,A2,A2_std,trials,std_flag\n";
  if (reports.empty()) return;
  for (const auto& r : aggregate_trials(reports)) {
    const auto at = r.method.find("@beta=");
    out << r.method.substr(at + 6) << ',' << r.method.substr(0, at) << ','
        << format_double(r.sigma) << ',' << r.group << ',' << format_double(r.a1) << ','
        << format_double(r.a1_std) << ',' << format_double(r.a2) << ','
        << format_double(r.a2_std) << ',' << r.trials << ','
        << (r.std_undefined ? "single_trial" : "") << '\n';
  }
}

}  // namespace

std::vector<PlannedJob> plan_suite(const ExperimentConfig& cfg, int num_groups, bool with_sweep) {
  const bool risk_study = cfg.study == Study::tabular_risk;
  const std::vector<double> sigmas = risk_study ? std::vector<double>{0.0} : cfg.sigmas;
  std::vector<int> groups = cfg.groups;
  if (groups.empty())
    for (int g = 1; g <= num_groups; ++g) groups.push_back(g);
  for (int g : groups)
    if (g > num_groups)
      throw ConfigError("groups: group " + std::to_string(g) + " exceeds the " +
                        std::to_string(num_groups) + " groups of the data");
  std::vector<PlannedJob> jobs;
  auto add = [&](MethodKind m, const std::string& label, double beta, double sigma) {
    for (int g : groups)
      for (int t = 0; t < cfg.trials; ++t)
        jobs.push_back({m, label, beta, sigma, g, t, job_seed(cfg.seed, label, sigma, g, t)});
  };
  for (double sigma : sigmas)
    for (const auto& name : cfg.methods) add(parse_method(name), name, -1.0, sigma);
  if (with_sweep && cfg.beta_sweep.enabled && !risk_study)
    for (double sigma : sigmas)
      for (double beta : cfg.beta_sweep.betas)
        add(parse_method(cfg.beta_sweep.method),
            cfg.beta_sweep.method + "@beta=" + format_double(beta), beta, sigma);
  return jobs;
}

SuiteResult run_suite(const ExperimentConfig& cfg, bool with_sweep) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const bool risk_study = cfg.study == Study::tabular_risk;
  const std::vector<double> sigmas = risk_study ? std::vector<double>{0.0} : cfg.sigmas;

  // Datasets: one per (sigma, trial) when redrawn, one per sigma otherwise.
  std::vector<PairedDataset> datasets;
  std::map<std::pair<std::size_t, int>, std::size_t> data_of;
  for (std::size_t s = 0; s < sigmas.size(); ++s)
    for (int t = 0; t < cfg.trials; ++t) {
      if ((!cfg.redraw_data || risk_study) && t > 0) {
        data_of[{s, t}] = data_of[{s, 0}];
        continue;
      }
      data_of[{s, t}] = datasets.size();
      datasets.push_back(suite_dataset(cfg, sigmas[s], t));
    }

  const std::vector<PlannedJob> jobs = plan_suite(cfg, datasets.front().num_groups, with_sweep);
  auto data_index = [&](const PlannedJob& job) {
    const auto s = std::size_t(std::find(sigmas.begin(), sigmas.end(), job.sigma) - sigmas.begin());
    return data_of.at({s, job.trial});
  };

  const MethodSettings base_settings = cfg.method_settings();
  const EvalSettings eval = cfg.eval_settings();
  SuiteResult result;
  result.jobs.resize(jobs.size());
  std::vector<std::optional<ValidationReport>> reports(jobs.size());
  std::vector<std::optional<RiskEvalReport>> risks(jobs.size());

  logger()->info("suite: {} jobs on {} workers", jobs.size(), cfg.workers);
  parallel_for(jobs.size(), std::size_t(cfg.workers), [&](std::size_t i) {
    const PlannedJob& job = jobs[i];
    JobRecord& rec = result.jobs[i];
    rec = {job.label, job.beta, job.sigma, job.group, job.trial, job.seed, 0.0, ""};
    const auto t0 = std::chrono::steady_clock::now();
    try {
      MethodSettings settings = base_settings;
      settings.workers = 1;
      settings.ensemble.workers = 1;
      if (job.beta >= 0.0) settings.beta = job.beta;
      const Synthesizer synth = method_synthesizer(job.method, settings);
      EvalSettings e = eval;
      if (!is_gan(job.method)) e.replicates = 1;
      const PairedDataset& data = datasets[data_index(job)];
      if (risk_study) {
        auto r = risk_difference_eval(data, job.group, job.label, synth, cfg.forest, e, rec.seed);
        r.sigma = job.sigma;
        r.trial = job.trial;
        risks[i] = std::move(r);
      } else {
        auto r = identify_group_experiment(data, job.group, job.label, synth, e, rec.seed);
        r.sigma = job.sigma;
        r.trial = job.trial;
        reports[i] = std::move(r);
      }
    } catch (const std::exception& ex) {
      rec.error = ex.what();
      logger()->error("job {} sigma={} group={} trial={} failed: {}", job.label, job.sigma,
                      job.group, job.trial, ex.what());
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });

  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (!result.jobs[i].error.empty()) ++result.failed;
    if (reports[i]) (jobs[i].beta < 0.0 ? result.reports : result.sweep).push_back(*reports[i]);
    if (risks[i]) result.risk.push_back(*risks[i]);
  }

  fs::create_directories(cfg.output);
  const fs::path out(cfg.output);
  if (risk_study) {
    write_risk_trials_csv(result.risk, (out / "risk_trials.csv").string());
    if (!result.risk.empty())
      write_risk_summary_csv(aggregate_risk(result.risk), (out / "risk_summary.csv").string());
  } else {
    write_trials_csv(result.reports, (out / "trials.csv").string());
    if (!result.reports.empty())
      write_summary_csv(aggregate_trials(result.reports), (out / "summary.csv").string());
    if (with_sweep && cfg.beta_sweep.enabled)
      write_sweep_csv(result.sweep, (out / "beta_sweep.csv").string());
  }

  const json config_json = to_json(cfg);
  json manifest = {{"config_hash", hex(fnv1a(config_json.dump()))},
                   {"master_seed", cfg.seed},
                   {"study", to_string(cfg.study)},
                   {"config", config_json},
                   {"failed_jobs", result.failed}};
  json job_list = json::array();
  for (const auto& r : result.jobs) {
    json j = {{"method", r.method}, {"sigma", r.sigma},        {"group", r.group},
              {"trial", r.trial},   {"seed", r.seed},          {"wall_seconds", r.wall_seconds},
              {"status", r.error.empty() ? "ok" : "failed"}};
    if (r.beta >= 0.0) j["beta"] = r.beta;
    if (!r.error.empty()) j["error"] = r.error;
    job_list.push_back(std::move(j));
  }
  manifest["jobs"] = std::move(job_list);
  manifest["wall_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ofstream mf(out / "manifest.json", std::ios::binary);
  mf << manifest.dump(2) << '\n';
  return result;
}

}  // namespace ctes
