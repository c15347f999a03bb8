#include "ctes/ensemble.hpp"

#include <algorithm>
#include <numeric>

#include "ctes/errors.hpp"
#include "ctes/log.hpp"
#include "ctes/parallel.hpp"

namespace ctes {

void EnsembleConfig::validate() const {
  if (h < 1) throw ConfigError("ensemble.h must be >= 1");
  if (k <= 2 * h)
    throw ConfigError("ensemble.k must be larger than 2h (k = " + std::to_string(k) +
                      ", h = " + std::to_string(h) + ")");
  if (workers < 1) throw ConfigError("ensemble.workers must be >= 1");
  member.validate();
}

namespace {

struct LabeledRows {
  MatrixXd x;
  std::vector<int> y;
};

/// Sorts rows lexicographically (label last) so the classifier input does
/// not depend on the order the batches arrived in.
LabeledRows canonical(const MatrixXd& x, const std::vector<int>& y) {
  std::vector<Index> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    for (Index j = 0; j < x.cols(); ++j)
      if (x(a, j) != x(b, j)) return x(a, j) < x(b, j);
    return y[std::size_t(a)] < y[std::size_t(b)];
  });
  LabeledRows out{x(order, Eigen::all), std::vector<int>(order.size())};
  for (std::size_t i = 0; i < order.size(); ++i) out.y[i] = y[std::size_t(order[i])];
  return out;
}

}  // namespace

std::vector<double> inverse_validation_scores(std::span<const MatrixXd> fakes, const MatrixXd& real,
                                              const ClassifierSpec& classifier, std::uint64_t seed,
                                              int workers) {
  if (fakes.size() < 2)
    throw EnsembleError("inverse validation needs at least two generators (no peer fakes for k = " +
                        std::to_string(fakes.size()) + ")");
  if (real.rows() == 0) throw InputError("inverse validation: real batch is empty");
  for (const auto& f : fakes) {
    if (f.rows() == 0) throw InputError("inverse validation: empty fake batch");
    if (f.cols() != real.cols())
      throw InputError("inverse validation: fake and real expression dimensions differ");
  }
  std::vector<double> scores(fakes.size());
  parallel_for(fakes.size(), std::size_t(std::max(1, workers)), [&](std::size_t i) {
    Index rows = real.rows();
    for (std::size_t j = 0; j < fakes.size(); ++j)
      if (j != i) rows += fakes[j].rows();
    MatrixXd x(rows, real.cols());
    std::vector<int> y;
    y.reserve(std::size_t(rows));
    Index at = 0;
    for (std::size_t j = 0; j < fakes.size(); ++j) {
      if (j == i) continue;
      x.middleRows(at, fakes[j].rows()) = fakes[j];
      at += fakes[j].rows();
      y.insert(y.end(), std::size_t(fakes[j].rows()), 0);
    }
    x.middleRows(at, real.rows()) = real;
    y.insert(y.end(), std::size_t(real.rows()), 1);

    const LabeledRows train = canonical(x, y);
    const VectorXi pred = fit_predict(classifier, train.x, train.y, fakes[i], seed);
    scores[i] = double((pred.array() == 0).count()) / double(pred.size());
  });
  return scores;
}

std::vector<int> select_top_h(std::span<const double> scores, int h) {
  if (h < 1) throw ConfigError("select_top_h: h must be >= 1");
  if (std::size_t(h) > scores.size())
    throw ConfigError("select_top_h: h = " + std::to_string(h) + " exceeds k = " +
                      std::to_string(scores.size()));
  std::vector<int> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return scores[std::size_t(a)] > scores[std::size_t(b)]; });
  idx.resize(std::size_t(h));
  std::sort(idx.begin(), idx.end());
  return idx;
}

EnsembleModel train_se_ctes(const PairedDataset& data, const EnsembleConfig& cfg) {
  cfg.validate();
  data.validate();
  const std::size_t k = std::size_t(cfg.k);
  EnsembleModel ens;
  ens.config = cfg;
  ens.models.resize(k);
  ens.scores.assign(k, 0.0);
  std::vector<std::string> failures(k);

  parallel_for(k, std::size_t(cfg.workers), [&](std::size_t i) {
    TrainConfig member = cfg.member;
    member.seed = derive_seed(cfg.seed, std::uint64_t(i));
    try {
      ens.models[i] = train_ctes(data, member);
    } catch (const TrainingDiverged& e) {
      failures[i] = e.what();
    }
  });

  std::vector<int> finished;
  for (std::size_t i = 0; i < k; ++i) {
    if (ens.models[i]) {
      finished.push_back(int(i));
    } else {
      ens.diagnostics.push_back("member " + std::to_string(i) + " diverged: " + failures[i]);
      logger()->warn("se-ctes: {}", ens.diagnostics.back());
    }
  }
  if (finished.size() < std::size_t(cfg.h))
    throw EnsembleError("only " + std::to_string(finished.size()) + " of " + std::to_string(k) +
                        " members finished training; " + std::to_string(cfg.h) + " required");

  if (finished.size() == 1) {
    ens.scores[std::size_t(finished[0])] = 1.0;
  } else {
    std::vector<MatrixXd> fakes(finished.size());
    parallel_for(finished.size(), std::size_t(cfg.workers), [&](std::size_t p) {
      const int i = finished[p];
      Rng rng(derive_seed(cfg.seed, {fnv1a("inverse-fakes"), std::uint64_t(i)}));
      fakes[p] = synthesize_rows(*ens.models[std::size_t(i)], data.characteristics, rng,
                                 cfg.member.jitter);
    });
    const auto scores = inverse_validation_scores(fakes, data.expressions, cfg.classifier,
                                                  derive_seed(cfg.seed, "inverse-classifier"),
                                                  cfg.workers);
    for (std::size_t p = 0; p < finished.size(); ++p)
      ens.scores[std::size_t(finished[p])] = scores[p];
  }

  // Diverged members never outrank a finished one.
  std::vector<double> ranking = ens.scores;
  for (std::size_t i = 0; i < k; ++i)
    if (!ens.models[i]) ranking[i] = -1.0;
  ens.selected = select_top_h(ranking, cfg.h);
  logger()->info("se-ctes: selected members {} of {}", ens.selected.size(), k);
  return ens;
}

MatrixXd ensemble_synthesize(const EnsembleModel& ens, const MatrixXd& x, int total, Rng& rng) {
  const int h = int(ens.selected.size());
  if (h == 0) throw EnsembleError("ensemble has no selected members");
  if (total < h)
    throw InputError("ensemble_synthesize: total = " + std::to_string(total) +
                     " is smaller than the number of selected members");
  if (x.rows() == 0) throw InputError("ensemble_synthesize: no characteristic rows");
  std::vector<MatrixXd> parts;
  Index width = 0;
  for (int p = 0; p < h; ++p) {
    const auto& slot = ens.models.at(std::size_t(ens.selected[std::size_t(p)]));
    if (!slot) throw EnsembleError("selected member has no trained model");
    const int count = total / h + (p < total % h ? 1 : 0);
    std::vector<Index> rows(static_cast<std::size_t>(count));
    for (int q = 0; q < count; ++q) rows[std::size_t(q)] = Index(p + Index(h) * q) % x.rows();
    Rng member_rng(rng());
    parts.push_back(synthesize_rows(*slot, x(rows, Eigen::all), member_rng, ens.config.member.jitter));
    width = parts.back().cols();
  }
  MatrixXd out(total, width);
  Index at = 0;
  for (const auto& part : parts) {
    out.middleRows(at, part.rows()) = part;
    at += part.rows();
  }
  return out;
}

}  // namespace ctes
