#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctes/classifier.hpp"
#include "ctes/ctes.hpp"

namespace ctes {

struct EnsembleConfig {
  int k = 5;
  int h = 2;
  TrainConfig member;
  ClassifierSpec classifier;
  int workers = 1;
  std::uint64_t seed = 0;

  /// Throws ConfigError unless h >= 1 and k > 2h.
  void validate() const;
};

struct EnsembleModel {
  /// One slot per member; empty when that member's training diverged.
  std::vector<std::optional<CtesModel>> models;
  std::vector<double> scores;
  std::vector<int> selected;  // ascending member indices
  std::vector<std::string> diagnostics;
  EnsembleConfig config;
};

/// a_i: the fraction of batch i that a classifier trained on the other
/// batches (class 0) against `real` (class 1) assigns to class 0. Training
/// rows are put in a canonical order and every classifier uses `seed`, so
/// reordering the batches reorders the scores and nothing else.
std::vector<double> inverse_validation_scores(std::span<const MatrixXd> fakes, const MatrixXd& real,
                                              const ClassifierSpec& classifier, std::uint64_t seed,
                                              int workers = 1);

/// Indices of the h largest scores, ties to the lower index, sorted ascending.
std::vector<int> select_top_h(std::span<const double> scores, int h);

EnsembleModel train_se_ctes(const PairedDataset& data, const EnsembleConfig& cfg);

/// `total` rows drawn as a uniform mixture over the selected members. The
/// member at selection position p produces total / h rows (one more when
/// p < total % h) for characteristic rows p, p + h, p + 2h, ... of x (mod N).
MatrixXd ensemble_synthesize(const EnsembleModel& ens, const MatrixXd& x, int total, Rng& rng);

}  // namespace ctes
