#include "ctes/methods.hpp"

#include <algorithm>

#include "ctes/errors.hpp"

namespace ctes {

FittedModel fit_model(MethodKind method, const PairedDataset& train, const MethodSettings& settings,
                      std::uint64_t seed) {
  train.validate();
  FittedModel out;
  out.method = method;
  out.seed = seed;
  const VariantSettings variant =
      is_gan(method) ? variant_config(to_string(method)) : VariantSettings{};
  switch (method) {
    case MethodKind::pls: {
      const int comps = settings.pls_components > 0
                            ? settings.pls_components
                            : int(std::min<Index>(train.char_dim(), 2));
      out.model = pls_fit(train.characteristics, train.expressions, comps);
      break;
    }
    case MethodKind::grnn:
      out.model = grnn_fit(train.characteristics, train.expressions, settings.grnn_bandwidth);
      break;
    case MethodKind::cgan:
    case MethodKind::gan_cls:
    case MethodKind::ctes: {
      TrainConfig cfg = settings.train;
      cfg.beta = settings.beta.value_or(variant.beta);
      cfg.seed = seed;
      out.model = train_ctes(train, cfg);
      break;
    }
    case MethodKind::se_ctes: {
      EnsembleConfig cfg = settings.ensemble;
      cfg.member = settings.train;
      cfg.member.beta = settings.beta.value_or(variant.beta);
      cfg.workers = std::max(cfg.workers, settings.workers);
      cfg.seed = seed;
      out.model = train_se_ctes(train, cfg);
      break;
    }
  }
  return out;
}

MatrixXd synthesize_model(const FittedModel& fitted, const MatrixXd& x, Rng& rng) {
  if (x.rows() == 0) throw InputError("synthesize: no characteristic rows");
  return std::visit(
      [&](const auto& m) -> MatrixXd {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, PlsModel>) {
          return pls_predict(m, x);
        } else if constexpr (std::is_same_v<T, GrnnModel>) {
          return grnn_predict(m, x);
        } else if constexpr (std::is_same_v<T, CtesModel>) {
          return synthesize_rows(m, x, rng, m.config.jitter);
        } else {
          return ensemble_synthesize(m, x, int(x.rows()), rng);
        }
      },
      fitted.model);
}

}  // namespace ctes
