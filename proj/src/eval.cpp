#include "ctes/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "ctes/datagen.hpp"
#include "ctes/errors.hpp"
#include "ctes/log.hpp"

namespace ctes {

AMetrics compute_a_metrics(const ConfusionCounts& c) {
  if (c.tp < 0 || c.fp < 0 || c.fn < 0 || c.tn < 0)
    throw InputError("confusion counts must be nonnegative");
  if (c.tp + c.fp == 0) throw UndefinedMetric("A1 undefined: TP + FP = 0");
  if (c.tn + c.fn == 0) throw UndefinedMetric("A2 undefined: TN + FN = 0");
  return {double(c.tp) / double(c.tp + c.fp), double(c.tn) / double(c.tn + c.fn)};
}

GroupSplit split_train_test(const PairedDataset& data, std::uint64_t seed) {
  data.validate();
  GroupSplit split;
  split.train.resize(std::size_t(data.num_groups));
  split.test.resize(std::size_t(data.num_groups));
  for (int g = 1; g <= data.num_groups; ++g) {
    std::vector<Index> rows = data.rows_in_group(g);
    if (rows.size() < 2)
      throw InputError("split_train_test: group " + std::to_string(g) + " has " +
                       std::to_string(rows.size()) + " rows, need at least 2");
    Rng rng(derive_seed(seed, std::uint64_t(g)));
    std::shuffle(rows.begin(), rows.end(), rng);
    const std::size_t n_train = (rows.size() + 1) / 2;
    auto mid = rows.begin() + std::ptrdiff_t(n_train);
    split.train[std::size_t(g - 1)].assign(rows.begin(), mid);
    split.test[std::size_t(g - 1)].assign(mid, rows.end());
  }
  return split;
}

Synthesizer method_synthesizer(MethodKind method, const MethodSettings& settings) {
  return [method, settings](const PairedDataset& train, const MatrixXd& x, std::uint64_t seed) {
    const FittedModel fitted = fit_model(method, train, settings, derive_seed(seed, "fit"));
    Rng rng(derive_seed(seed, "synthesize"));
    return synthesize_model(fitted, x, rng);
  };
}

namespace {

std::vector<Index> rows_except_group(const PairedDataset& data, int group) {
  std::vector<Index> rows;
  for (Index r = 0; r < data.size(); ++r)
    if (data.groups[r] != group) rows.push_back(r);
  return rows;
}

void check_group(const PairedDataset& data, int group) {
  data.validate();
  if (data.num_groups < 2) throw InputError("identify-group protocol needs at least two groups");
  if (group < 1 || group > data.num_groups)
    throw InputError("group " + std::to_string(group) + " outside [1, " +
                     std::to_string(data.num_groups) + "]");
  if (data.rows_in_group(group).empty())
    throw InputError("group " + std::to_string(group) + " has no rows");
}

}  // namespace

MatrixXd synthesize_group(const PairedDataset& data, int group, const Synthesizer& synth,
                          const EvalSettings& settings, std::uint64_t seed) {
  check_group(data, group);
  if (settings.replicates < 1) throw ConfigError("replicates must be >= 1");
  const PairedDataset train = data.subset(rows_except_group(data, group));
  const MatrixXd xq = data.characteristics(data.rows_in_group(group), Eigen::all);
  std::vector<MatrixXd> batches;
  for (int r = 0; r < settings.replicates; ++r) {
    batches.push_back(synth(train, xq, derive_seed(seed, std::uint64_t(r))));
    if (batches.back().rows() != xq.rows() || batches.back().cols() != data.expr_dim())
      throw InputError("synthesizer returned a batch of the wrong shape");
  }
  if (batches.size() == 1) return batches.front();
  MatrixXd merged(xq.rows() * Index(batches.size()), data.expr_dim());
  for (std::size_t r = 0; r < batches.size(); ++r)
    merged.middleRows(Index(r) * xq.rows(), xq.rows()) = batches[r];
  if (!settings.subsample_merged) return merged;
  std::vector<Index> pick(static_cast<std::size_t>(merged.rows()));
  std::iota(pick.begin(), pick.end(), 0);
  Rng rng(derive_seed(seed, "subsample"));
  std::shuffle(pick.begin(), pick.end(), rng);
  pick.resize(std::size_t(xq.rows()));
  std::sort(pick.begin(), pick.end());
  return merged(pick, Eigen::all);
}

ValidationReport identify_group_experiment(const PairedDataset& data, int group,
                                           const std::string& method, const Synthesizer& synth,
                                           const EvalSettings& settings, std::uint64_t seed) {
  check_group(data, group);
  const MatrixXd fake = synthesize_group(data, group, synth, settings, derive_seed(seed, "synth"));
  const GroupSplit split = split_train_test(data, derive_seed(seed, "split"));

  std::vector<Index> train_rows, test_rows = data.rows_in_group(group);
  const std::size_t identified = test_rows.size();
  for (int g = 1; g <= data.num_groups; ++g) {
    if (g == group) continue;
    const auto& tr = split.train[std::size_t(g - 1)];
    const auto& te = split.test[std::size_t(g - 1)];
    train_rows.insert(train_rows.end(), tr.begin(), tr.end());
    test_rows.insert(test_rows.end(), te.begin(), te.end());
  }

  MatrixXd train_x(fake.rows() + Index(train_rows.size()), data.expr_dim());
  train_x.topRows(fake.rows()) = fake;
  train_x.bottomRows(Index(train_rows.size())) = data.expressions(train_rows, Eigen::all);
  std::vector<int> train_y(std::size_t(fake.rows()), group);
  for (Index r : train_rows) train_y.push_back(data.groups[r]);

  const VectorXi pred = fit_predict(settings.classifier, train_x, train_y,
                                    data.expressions(test_rows, Eigen::all),
                                    derive_seed(seed, "classifier"));
  ValidationReport rep;
  rep.method = method;
  rep.group = group;
  for (std::size_t t = 0; t < test_rows.size(); ++t) {
    const bool into = pred[Index(t)] == group;
    if (t < identified)
      (into ? rep.confusion.tp : rep.confusion.fp)++;
    else
      (into ? rep.confusion.fn : rep.confusion.tn)++;
  }
  const AMetrics m = compute_a_metrics(rep.confusion);
  rep.a1 = m.a1;
  rep.a2 = m.a2;
  logger()->debug("identify group {} with {}: A1 {:.4f} A2 {:.4f}", group, method, rep.a1, rep.a2);
  return rep;
}

ValidationReport identify_group_experiment(const PairedDataset& data, int group, MethodKind method,
                                           const MethodSettings& method_settings,
                                           const EvalSettings& settings, std::uint64_t seed) {
  EvalSettings eff = settings;
  if (!is_gan(method)) eff.replicates = 1;
  return identify_group_experiment(data, group, to_string(method),
                                   method_synthesizer(method, method_settings), eff, seed);
}

RiskEvalReport risk_difference_eval(const PairedDataset& data, int group, const std::string& method,
                                    const Synthesizer& synth, const ForestConfig& forest,
                                    const EvalSettings& settings, std::uint64_t seed) {
  check_group(data, group);
  if (!data.outcome) throw InputError("risk evaluation needs an outcome column");
  const VectorXi& outcome = *data.outcome;
  for (Index r = 0; r < outcome.size(); ++r)
    if (outcome[r] != 0 && outcome[r] != 1) throw InputError("outcome labels must be 0 or 1");

  const std::vector<Index> others = rows_except_group(data, group);
  const std::vector<Index> members = data.rows_in_group(group);
  EvalSettings eff = settings;
  eff.subsample_merged = true;
  const MatrixXd fake = synthesize_group(data, group, synth, eff, derive_seed(seed, "synth"));

  const Index m = data.char_dim(), n = data.expr_dim();
  const Index total = Index(others.size() + members.size());
  auto features = [&](const MatrixXd& group_expr) {
    MatrixXd f(total, m + n);
    f.topLeftCorner(Index(others.size()), m) = data.characteristics(others, Eigen::all);
    f.topRightCorner(Index(others.size()), n) = data.expressions(others, Eigen::all);
    f.bottomLeftCorner(Index(members.size()), m) = data.characteristics(members, Eigen::all);
    f.bottomRightCorner(Index(members.size()), n) = group_expr;
    return f;
  };
  std::vector<int> labels;
  for (Index r : others) labels.push_back(outcome[r]);
  for (Index r : members) labels.push_back(outcome[r]);

  const MatrixXd real_features = features(data.expressions(members, Eigen::all));
  MatrixXd probe(Index(members.size()), m + n);
  probe << data.characteristics(members, Eigen::all), data.expressions(members, Eigen::all);

  ForestConfig cfg = forest;
  cfg.seed = derive_seed(seed, "risk-forest");
  auto risk_of_one = [&](const MatrixXd& x) {
    const Forest f = fit_forest(x, labels, cfg);
    const MatrixXd votes = vote_fractions(f, probe);
    const auto it = std::find(f.labels.begin(), f.labels.end(), 1);
    if (it == f.labels.end()) return VectorXd(VectorXd::Zero(probe.rows()));
    return VectorXd(votes.col(it - f.labels.begin()));
  };
  const VectorXd r_s = risk_of_one(real_features);
  const VectorXd r_a = risk_of_one(features(fake));

  RiskEvalReport rep;
  rep.method = method;
  rep.group = group;
  rep.r_actual.assign(r_s.data(), r_s.data() + r_s.size());
  rep.r_synthetic.assign(r_a.data(), r_a.data() + r_a.size());
  const Eigen::ArrayXd diff = (r_a - r_s).array().abs();
  rep.mean_abs_diff = diff.mean();
  rep.std_abs_diff =
      diff.size() > 1 ? std::sqrt((diff - rep.mean_abs_diff).square().sum() / double(diff.size() - 1))
                      : 0.0;
  return rep;
}

namespace {

struct Moments {
  double mean = 0.0, sd = 0.0;
};

Moments moments(const std::vector<double>& v) {
  Moments out;
  out.mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.sd = std::sqrt(ss / double(v.size() - 1));
  }
  return out;
}

/// Stable key order: sigma, then method by first appearance, then group.
template <typename Report>
std::vector<std::vector<const Report*>> group_reports(const std::vector<Report>& reports) {
  if (reports.empty()) throw InputError("aggregate: no reports");
  std::vector<std::string> method_order;
  for (const auto& r : reports)
    if (std::find(method_order.begin(), method_order.end(), r.method) == method_order.end())
      method_order.push_back(r.method);
  auto method_rank = [&](const std::string& m) {
    return std::find(method_order.begin(), method_order.end(), m) - method_order.begin();
  };
  std::map<std::tuple<double, std::ptrdiff_t, int>, std::vector<const Report*>> cells;
  for (const auto& r : reports) cells[{r.sigma, method_rank(r.method), r.group}].push_back(&r);
  std::vector<std::vector<const Report*>> out;
  for (auto& [key, v] : cells) out.push_back(std::move(v));
  return out;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  return out;
}

template <typename Fn>
void read_rows(const std::string& path, const std::string& expected_header, std::size_t fields,
               Fn&& on_row) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  std::string line;
  std::size_t offset = 0;
  if (!std::getline(in, line) || line != expected_header)
    throw ParseError(path + ": unexpected header", 0);
  offset += line.size() + 1;
  while (std::getline(in, line)) {
    if (line.empty()) {
      offset += 1;
      continue;
    }
    const auto f = split_fields(line);
    if (f.size() != fields)
      throw ParseError(path + ": expected " + std::to_string(fields) + " fields", offset);
    try {
      on_row(f);
    } catch (const std::logic_error&) {
      throw ParseError(path + ": malformed number", offset);
    }
    offset += line.size() + 1;
  }
}

constexpr const char* kTrialsHeader = "method,sigma,group,trial,TP,FP,FN,TN,A1,A2";
constexpr const char* kSummaryHeader = "method,sigma,group,A1,A1_std,A2,A2_std,trials,std_flag";
constexpr const char* kRiskTrialsHeader = "method,sigma,group,trial,risk_diff,risk_diff_std";
constexpr const char* kRiskSummaryHeader = "method,sigma,group,risk_diff,risk_diff_std,trials,std_flag";

}  // namespace

std::vector<SummaryRow> aggregate_trials(const std::vector<ValidationReport>& reports) {
  std::vector<SummaryRow> rows;
  for (const auto& cell : group_reports(reports)) {
    std::vector<double> a1, a2;
    for (const auto* r : cell) {
      a1.push_back(r->a1);
      a2.push_back(r->a2);
    }
    const Moments m1 = moments(a1), m2 = moments(a2);
    SummaryRow row{cell.front()->method, cell.front()->sigma, cell.front()->group, int(cell.size()),
                   m1.mean, m1.sd, m2.mean, m2.sd, cell.size() == 1};
    rows.push_back(row);
  }
  return rows;
}

std::vector<RiskSummaryRow> aggregate_risk(const std::vector<RiskEvalReport>& reports) {
  std::vector<RiskSummaryRow> rows;
  for (const auto& cell : group_reports(reports)) {
    std::vector<double> v;
    for (const auto* r : cell) v.push_back(r->mean_abs_diff);
    const Moments m = moments(v);
    rows.push_back({cell.front()->method, cell.front()->sigma, cell.front()->group,
                    int(cell.size()), m.mean, m.sd, cell.size() == 1});
  }
  return rows;
}

void write_trials_csv(const std::vector<ValidationReport>& reports, const std::string& path) {
  auto out = open_out(path);
  out << kTrialsHeader << '\n';
  for (const auto& r : reports)
    out << r.method << ',' << format_double(r.sigma) << ',' << r.group << ',' << r.trial << ','
        << r.confusion.tp << ',' << r.confusion.fp << ',' << r.confusion.fn << ','
        << r.confusion.tn << ',' << format_double(r.a1) << ',' << format_double(r.a2) << '\n';
}

std::vector<ValidationReport> read_trials_csv(const std::string& path) {
  std::vector<ValidationReport> out;
  read_rows(path, kTrialsHeader, 10, [&](const std::vector<std::string>& f) {
    ValidationReport r;
    r.method = f[0];
    r.sigma = std::stod(f[1]);
    r.group = std::stoi(f[2]);
    r.trial = std::stoi(f[3]);
    r.confusion = {std::stol(f[4]), std::stol(f[5]), std::stol(f[6]), std::stol(f[7])};
    r.a1 = std::stod(f[8]);
    r.a2 = std::stod(f[9]);
    out.push_back(r);
  });
  return out;
}

void write_summary_csv(const std::vector<SummaryRow>& rows, const std::string& path) {
  auto out = open_out(path);
  out << kSummaryHeader << '\n';
  for (const auto& r : rows)
    out << r.method << ',' << format_double(r.sigma) << ',' << r.group << ','
        << format_double(r.a1) << ',' << format_double(r.a1_std) << ',' << format_double(r.a2)
        << ',' << format_double(r.a2_std) << ',' << r.trials << ','
        << (r.std_undefined ? "single_trial" : "") << '\n';
}

void write_risk_trials_csv(const std::vector<RiskEvalReport>& reports, const std::string& path) {
  auto out = open_out(path);
  out << kRiskTrialsHeader << '\n';
  for (const auto& r : reports)
    out << r.method << ',' << format_double(r.sigma) << ',' << r.group << ',' << r.trial << ','
        << format_double(r.mean_abs_diff) << ',' << format_double(r.std_abs_diff) << '\n';
}

std::vector<RiskEvalReport> read_risk_trials_csv(const std::string& path) {
  std::vector<RiskEvalReport> out;
  read_rows(path, kRiskTrialsHeader, 6, [&](const std::vector<std::string>& f) {
    RiskEvalReport r;
    r.method = f[0];
    r.sigma = std::stod(f[1]);
    r.group = std::stoi(f[2]);
    r.trial = std::stoi(f[3]);
    r.mean_abs_diff = std::stod(f[4]);
    r.std_abs_diff = std::stod(f[5]);
    out.push_back(r);
  });
  return out;
}

void write_risk_summary_csv(const std::vector<RiskSummaryRow>& rows, const std::string& path) {
  auto out = open_out(path);
  out << kRiskSummaryHeader << '\n';
  for (const auto& r : rows)
    out << r.method << ',' << format_double(r.sigma) << ',' << r.group << ','
        << format_double(r.mean) << ',' << format_double(r.mean_std) << ',' << r.trials << ','
        << (r.std_undefined ? "single_trial" : "") << '\n';
}

}  // namespace ctes
