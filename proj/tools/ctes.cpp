// Experiment harness: simulate, train, synth, validate, bench, report.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "ctes/config.hpp"
#include "ctes/errors.hpp"
#include "ctes/eval.hpp"
#include "ctes/log.hpp"
#include "ctes/model_io.hpp"
#include "ctes/suite.hpp"

namespace fs = std::filesystem;
using namespace ctes;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out;
};

ExperimentConfig load_config(const Globals& g) {
  ExperimentConfig cfg = g.config.empty() ? parse_config(nlohmann::json::object())
                                          : parse_config_file(g.config);
  if (g.seed) cfg.seed = *g.seed;
  if (g.workers) cfg.workers = *g.workers;
  if (g.out) cfg.output = *g.out;
  cfg.validate();
  return cfg;
}

std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.output);
  return (fs::path(cfg.output) / name).string();
}

std::string sigma_tag(double sigma) {
  std::string s = format_double(sigma);
  for (auto& c : s)
    if (c == '.') c = 'p';
  return s;
}

PairedDataset load_or_simulate(const ExperimentConfig& cfg, const std::string& data_path,
                               double sigma) {
  if (!data_path.empty()) return read_csv(data_path);
  return suite_dataset(cfg, sigma, 0);
}

int cmd_simulate(const ExperimentConfig& cfg) {
  if (cfg.study == Study::tabular_risk) {
    std::cerr << "simulate: the tabular-risk study reads user data; nothing to simulate\n";
    return 2;
  }
  if (cfg.study == Study::scalar_to_matrix) {
    const auto path = out_path(cfg, "scalar_to_matrix.csv");
    write_csv(suite_dataset(cfg, cfg.sigmas.front(), 0), path);
    std::cout << path << '\n';
    return 0;
  }
  for (double sigma : cfg.sigmas) {
    for (int t = 0; t < (cfg.redraw_data ? cfg.trials : 1); ++t) {
      const auto path = out_path(cfg, "multivariate_sigma_" + sigma_tag(sigma) + "_trial_" +
                                          std::to_string(t) + ".csv");
      write_csv(suite_dataset(cfg, sigma, t), path);
      std::cout << path << '\n';
    }
  }
  return 0;
}

int cmd_train(const ExperimentConfig& cfg, const std::string& method, const std::string& data_path,
              double sigma, int exclude_group, std::string model_path) {
  PairedDataset data = load_or_simulate(cfg, data_path, sigma);
  if (exclude_group > 0) {
    std::vector<Index> rows;
    for (Index r = 0; r < data.size(); ++r)
      if (data.groups[r] != exclude_group) rows.push_back(r);
    data = data.subset(rows);
  }
  MethodSettings settings = cfg.method_settings();
  settings.workers = cfg.workers;
  settings.ensemble.workers = cfg.workers;
  const FittedModel model = fit_model(parse_method(method), data, settings, cfg.seed);
  if (model_path.empty()) model_path = out_path(cfg, "model_" + method + ".json");
  save_model(model, model_path);
  std::cout << model_path << '\n';
  return 0;
}

int cmd_synth(const ExperimentConfig& cfg, const std::string& model_path,
              const std::string& data_path, double sigma, int group, int count) {
  const FittedModel model = load_model(model_path);
  PairedDataset data = load_or_simulate(cfg, data_path, sigma);
  if (group > 0) data = data.subset(data.rows_in_group(group));
  if (data.size() == 0) throw InputError("synth: no characteristic rows selected");
  if (count > 0) {
    std::vector<Index> rows(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) rows[std::size_t(i)] = Index(i) % data.size();
    data = data.subset(rows);
  }
  Rng rng(derive_seed(cfg.seed, "synth"));
  data.expressions = synthesize_model(model, data.characteristics, rng);
  data.outcome.reset();
  const auto path = out_path(cfg, "synth.csv");
  write_csv(data, path);
  std::cout << path << '\n';
  return 0;
}

int cmd_validate(const ExperimentConfig& cfg, const std::string& method,
                 const std::string& data_path, double sigma, int group, int trial) {
  const PairedDataset data =
      data_path.empty() ? suite_dataset(cfg, sigma, trial) : read_csv(data_path);
  MethodSettings settings = cfg.method_settings();
  settings.workers = cfg.workers;
  settings.ensemble.workers = cfg.workers;
  EvalSettings eval = cfg.eval_settings();
  const MethodKind kind = parse_method(method);
  if (!is_gan(kind)) eval.replicates = 1;
  const std::uint64_t seed = job_seed(cfg.seed, method, sigma, group, trial);
  if (cfg.study == Study::tabular_risk) {
    auto rep = risk_difference_eval(data, group, method, method_synthesizer(kind, settings),
                                    cfg.forest, eval, seed);
    rep.sigma = sigma;
    rep.trial = trial;
    write_risk_trials_csv({rep}, out_path(cfg, "validate.csv"));
    std::cout << method << " group " << group << " mean |r_a - r_s| " << rep.mean_abs_diff
              << " (" << rep.std_abs_diff << ")\n";
    return 0;
  }
  auto rep = identify_group_experiment(data, group, method, method_synthesizer(kind, settings),
                                       eval, seed);
  rep.sigma = sigma;
  rep.trial = trial;
  write_trials_csv({rep}, out_path(cfg, "validate.csv"));
  std::cout << method << " sigma " << sigma << " group " << group << " A1 " << rep.a1 << " A2 "
            << rep.a2 << " (TP " << rep.confusion.tp << ", FP " << rep.confusion.fp << ", FN "
            << rep.confusion.fn << ", TN " << rep.confusion.tn << ")\n";
  return 0;
}

int cmd_bench(const ExperimentConfig& cfg, bool sweep) {
  const SuiteResult res = run_suite(cfg, sweep);
  std::cout << res.jobs.size() << " jobs, " << res.failed << " failed; reports in " << cfg.output
            << '\n';
  return res.failed > 0 ? 3 : 0;
}

bool is_risk_file(const std::string& path) {
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  return header.find("risk_diff") != std::string::npos;
}

int cmd_report(const ExperimentConfig& cfg, const std::vector<std::string>& inputs) {
  std::vector<ValidationReport> reports;
  std::vector<RiskEvalReport> risk;
  for (const auto& in : inputs) {
    if (is_risk_file(in)) {
      auto r = read_risk_trials_csv(in);
      risk.insert(risk.end(), r.begin(), r.end());
    } else {
      auto r = read_trials_csv(in);
      reports.insert(reports.end(), r.begin(), r.end());
    }
  }
  if (!reports.empty()) {
    const auto path = out_path(cfg, "summary.csv");
    write_summary_csv(aggregate_trials(reports), path);
    std::cout << path << '\n';
  }
  if (!risk.empty()) {
    const auto path = out_path(cfg, "risk_summary.csv");
    write_risk_summary_csv(aggregate_risk(risk), path);
    std::cout << path << '\n';
  }
  if (reports.empty() && risk.empty()) throw InputError("report: no trial rows found");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Characteristic-to-expression synthesis: experiment harness"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "JSON experiment configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Master seed (overrides the config)");
  app.add_option("--workers", g.workers, "Concurrent jobs")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Output directory (overrides the config)");

  auto* simulate = app.add_subcommand("simulate", "Write the study's synthetic datasets as CSV");

  std::string method = "se-ctes", data_path, model_path;
  double sigma = 0.01;
  int group = 0, trial = 0, count = 0;

  auto* train = app.add_subcommand("train", "Fit one method and save the model file");
  train->add_option("--method", method, "pls, grnn, cgan, gan-cls, ctes or se-ctes");
  train->add_option("--data", data_path, "Dataset CSV (default: simulate from the config)");
  train->add_option("--sigma", sigma, "Sigma for simulated data");
  train->add_option("--exclude-group", group, "Leave this group out of training");
  train->add_option("--model", model_path, "Model file to write");

  auto* synth = app.add_subcommand("synth", "Synthesize expressions from a model file");
  synth->add_option("--model", model_path, "Model file")->required();
  synth->add_option("--data", data_path, "CSV supplying characteristics");
  synth->add_option("--sigma", sigma, "Sigma for simulated characteristics");
  synth->add_option("--group", group, "Only characteristics of this group");
  synth->add_option("--count", count, "Number of rows (cycles through the characteristics)");

  auto* validate = app.add_subcommand("validate", "Run one identify-group experiment");
  validate->add_option("--method", method, "Method to validate");
  validate->add_option("--data", data_path, "Dataset CSV (default: simulate from the config)");
  validate->add_option("--sigma", sigma, "Sigma for simulated data");
  validate->add_option("--group", group, "Group to identify")->required();
  validate->add_option("--trial", trial, "Trial index (seed coordinate)");

  bool no_sweep = false;
  auto* bench = app.add_subcommand("bench", "Run the full suite plus the beta sweep");
  bench->add_flag("--no-sweep", no_sweep, "Skip the beta sweep");

  std::vector<std::string> inputs;
  auto* report = app.add_subcommand("report", "Aggregate trial CSVs into summary CSVs");
  report->add_option("inputs", inputs, "Trial CSV files")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    const ExperimentConfig cfg = load_config(g);
    if (*simulate) return cmd_simulate(cfg);
    if (*train) return cmd_train(cfg, method, data_path, sigma, group, model_path);
    if (*synth) return cmd_synth(cfg, model_path, data_path, sigma, group, count);
    if (*validate) return cmd_validate(cfg, method, data_path, sigma, group, trial);
    if (*bench) return cmd_bench(cfg, !no_sweep);
    if (*report) return cmd_report(cfg, inputs);
  } catch (const ParseError& e) {
    logger()->error("{} (byte {})", e.what(), e.offset());
    return 2;
  } catch (const ConfigError& e) {
    logger()->error("configuration: {}", e.what());
    return 2;
  } catch (const std::exception& e) {
    logger()->error("{}", e.what());
    return 1;
  }
  return 0;
}
