#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ctes/classifier.hpp"
#include "ctes/dataset.hpp"
#include "ctes/methods.hpp"

namespace ctes {

/// Positive means "classified into the identified group".
struct ConfusionCounts {
  long tp = 0;  // identified-group rows classified into it
  long fp = 0;  // identified-group rows classified elsewhere
  long fn = 0;  // other groups' test rows classified into it
  long tn = 0;  // other groups' test rows classified elsewhere

  long total() const { return tp + fp + fn + tn; }
};

struct AMetrics {
  double a1 = 0.0;
  double a2 = 0.0;
};

/// A1 = TP / (TP + FP), A2 = TN / (TN + FN). Throws UndefinedMetric on an
/// empty denominator.
AMetrics compute_a_metrics(const ConfusionCounts& c);

/// Row indices per group (index g - 1 for group g).
struct GroupSplit {
  std::vector<std::vector<Index>> train;
  std::vector<std::vector<Index>> test;
};

/// Seeded 50/50 split inside every group; odd counts give train the extra row.
GroupSplit split_train_test(const PairedDataset& data, std::uint64_t seed);

/// Produces one expression per row of `x` after fitting on `train`.
using Synthesizer =
    std::function<MatrixXd(const PairedDataset& train, const MatrixXd& x, std::uint64_t seed)>;

Synthesizer method_synthesizer(MethodKind method, const MethodSettings& settings);

struct EvalSettings {
  ClassifierSpec classifier;
  /// Independent fits per trial; their synthesized batches are merged.
  int replicates = 1;
  /// Subsample the merged batch back to |X(i)| rows.
  bool subsample_merged = true;
};

struct ValidationReport {
  std::string method;
  double sigma = 0.0;
  int group = 0;
  int trial = 0;
  ConfusionCounts confusion;
  double a1 = 0.0;
  double a2 = 0.0;
};

/// Trains on every group except `group`, synthesizes that group's expressions
/// from its characteristics, trains the validation classifier on the synthetic
/// rows (labeled `group`) plus the other groups' training halves, and scores
/// the real group rows together with the other groups' test halves.
ValidationReport identify_group_experiment(const PairedDataset& data, int group,
                                           const std::string& method, const Synthesizer& synth,
                                           const EvalSettings& settings, std::uint64_t seed);

ValidationReport identify_group_experiment(const PairedDataset& data, int group, MethodKind method,
                                           const MethodSettings& method_settings,
                                           const EvalSettings& settings, std::uint64_t seed);

/// Synthetic expressions for X(group): replicates merged and optionally
/// subsampled. Exposed for the harness and tests.
MatrixXd synthesize_group(const PairedDataset& data, int group, const Synthesizer& synth,
                          const EvalSettings& settings, std::uint64_t seed);

struct RiskEvalReport {
  std::string method;
  double sigma = 0.0;
  int group = 0;
  int trial = 0;
  double mean_abs_diff = 0.0;
  double std_abs_diff = 0.0;
  std::vector<double> r_actual;     // r_s per participant of the group
  std::vector<double> r_synthetic;  // r_a per participant of the group
};

/// r_s: outcome probability for the group's participants from a forest
/// trained on all actual participants. r_a: the same from a forest trained on
/// the other groups plus (X(i), synthetic Y(i)). Features are [x, y];
/// probabilities are vote fractions for outcome 1.
RiskEvalReport risk_difference_eval(const PairedDataset& data, int group, const std::string& method,
                                    const Synthesizer& synth, const ForestConfig& forest,
                                    const EvalSettings& settings, std::uint64_t seed);

struct SummaryRow {
  std::string method;
  double sigma = 0.0;
  int group = 0;
  int trials = 0;
  double a1 = 0.0, a1_std = 0.0;
  double a2 = 0.0, a2_std = 0.0;
  /// Only one report contributed, so the standard deviations are 0 by fiat.
  bool std_undefined = false;
};

/// Means and sample standard deviations per (method, sigma, group). Rows
/// come out ordered by sigma, then method in first-appearance order, then group.
std::vector<SummaryRow> aggregate_trials(const std::vector<ValidationReport>& reports);

struct RiskSummaryRow {
  std::string method;
  double sigma = 0.0;
  int group = 0;
  int trials = 0;
  double mean = 0.0, mean_std = 0.0;
  bool std_undefined = false;
};

std::vector<RiskSummaryRow> aggregate_risk(const std::vector<RiskEvalReport>& reports);

void write_trials_csv(const std::vector<ValidationReport>& reports, const std::string& path);
std::vector<ValidationReport> read_trials_csv(const std::string& path);
void write_summary_csv(const std::vector<SummaryRow>& rows, const std::string& path);
void write_risk_trials_csv(const std::vector<RiskEvalReport>& reports, const std::string& path);
void write_risk_summary_csv(const std::vector<RiskSummaryRow>& rows, const std::string& path);
std::vector<RiskEvalReport> read_risk_trials_csv(const std::string& path);

}  // namespace ctes
