#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include "ctes/baselines.hpp"
#include "ctes/ctes.hpp"
#include "ctes/ensemble.hpp"

namespace ctes {

using AnyModel = std::variant<PlsModel, GrnnModel, CtesModel, EnsembleModel>;

/// Settings shared by every method; variant_config() overrides beta and the
/// ensemble shape for the adversarial ones.
struct MethodSettings {
  TrainConfig train;
  EnsembleConfig ensemble;
  /// 0 means min(m, 2).
  int pls_components = 0;
  std::optional<double> grnn_bandwidth;
  /// Replaces the variant's beta; used by the beta sweep.
  std::optional<double> beta;
  int workers = 1;
};

struct FittedModel {
  MethodKind method = MethodKind::se_ctes;
  AnyModel model;
  std::uint64_t seed = 0;
};

FittedModel fit_model(MethodKind method, const PairedDataset& train, const MethodSettings& settings,
                      std::uint64_t seed);

/// One expression per row of x. Deterministic methods repeat their point
/// prediction; adversarial ones draw fresh noise from rng.
MatrixXd synthesize_model(const FittedModel& fitted, const MatrixXd& x, Rng& rng);

}  // namespace ctes
