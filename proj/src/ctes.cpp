#include "ctes/ctes.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "ctes/datagen.hpp"
#include "ctes/errors.hpp"
#include "ctes/log.hpp"

namespace ctes {

using Net = nn::Network<double>;
using Trace = nn::Trace<double>;
using Grads = nn::Gradients<double>;

Normalizer Normalizer::fit(const MatrixXd& rows) {
  Normalizer n;
  n.mean = rows.colwise().mean().transpose();
  n.scale.resize(rows.cols());
  for (Index j = 0; j < rows.cols(); ++j) {
    const double var = (rows.col(j).array() - n.mean[j]).square().mean();
    const double sd = std::sqrt(var);
    n.scale[j] = sd > 1e-12 ? sd : 1.0;
  }
  return n;
}

MatrixXd Normalizer::to_columns(const MatrixXd& rows) const {
  if (rows.cols() != mean.size())
    throw InputError("expected " + std::to_string(mean.size()) + " features, got " +
                     std::to_string(rows.cols()));
  return ((rows.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array())
      .matrix()
      .transpose();
}

MatrixXd Normalizer::from_columns(const MatrixXd& cols) const {
  return ((cols.array().colwise() * scale.array()).colwise() + mean.array()).matrix().transpose();
}

std::vector<std::string> TrainConfig::validate() const {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("train.beta must lie in [0, 1]");
  if (batch_size < 2) throw ConfigError("train.batch_size must be >= 2");
  if (iterations < 1) throw ConfigError("train.iterations must be >= 1");
  if (z_dim < 1) throw ConfigError("train.z_dim must be >= 1");
  if (hidden < 1) throw ConfigError("train.hidden must be >= 1");
  if (!(optimizer.learning_rate > 0.0)) throw ConfigError("train.learning_rate must be > 0");
  if (convergence_window < 1) throw ConfigError("train.convergence_window must be >= 1");
  if (convergence_tol < 0.0) throw ConfigError("train.convergence_tol must be >= 0");
  if (jitter < 0.0) throw ConfigError("train.jitter must be >= 0");
  std::vector<std::string> warnings;
  if (beta <= 0.5)
    warnings.push_back("train.beta = " + format_double(beta) +
                       " <= 0.5: the synthesized-pair term no longer outweighs the "
                       "mismatched-pair term");
  return warnings;
}

Architecture make_architecture(Index char_dim, Index expr_dim, const TrainConfig& cfg,
                               ImageShape image) {
  using nn::Activation;
  const int m = int(char_dim), n = int(expr_dim), z = cfg.z_dim, hidden = cfg.hidden;
  Architecture a;
  if (image.empty()) {
    a.h1 = {nn::dense(z + m, hidden, Activation::relu), nn::dense(hidden, hidden, Activation::relu)};
    a.decoder = {nn::dense(hidden, n, Activation::none)};
    a.encoder = {nn::dense(n, hidden, Activation::relu)};
    a.head = {nn::dense(m + hidden, hidden, Activation::relu),
              nn::dense(hidden, 1, Activation::sigmoid)};
    return a;
  }
  if (image.height != image.width || image.height % 16 != 0)
    throw ConfigError("image expressions need a square side divisible by 16, got " +
                      std::to_string(image.height) + "x" + std::to_string(image.width));
  const int channels[] = {1, 8, 16, 32, 64};
  const int base = image.height / 16;
  const int encoded = channels[4] * base * base;

  a.h1 = {nn::dense(z + m, hidden, Activation::relu), nn::dense(hidden, encoded, Activation::relu)};
  for (int j = 0; j < 4; ++j) {
    const int side = base << j;
    nn::ConvGeometry g{channels[4 - j], channels[3 - j], side, side, 4, 2, 1};
    a.decoder.push_back(nn::conv_transpose2d(g, j == 3 ? Activation::none : Activation::relu));
  }
  for (int j = 0; j < 4; ++j) {
    const int side = image.height >> j;
    nn::ConvGeometry g{channels[j], channels[j + 1], side, side, 4, 2, 1};
    a.encoder.push_back(nn::conv2d(g, Activation::relu));
  }
  a.head = {nn::dense(m + encoded, hidden, Activation::relu),
            nn::dense(hidden, 1, Activation::sigmoid)};
  return a;
}

CtesModel init_model(const PairedDataset& data, const TrainConfig& cfg) {
  data.validate();
  const Architecture arch = make_architecture(data.char_dim(), data.expr_dim(), cfg, data.image);
  CtesModel model;
  model.config = cfg;
  auto& g = model.generator;
  g.z_dim = cfg.z_dim;
  g.x_norm = Normalizer::fit(data.characteristics);
  g.y_norm = Normalizer::fit(data.expressions);
  g.image = data.image;
  g.h1 = nn::init_params(arch.h1, derive_seed(cfg.seed, "h1"));
  g.decoder = nn::init_params(arch.decoder, derive_seed(cfg.seed, "decoder"));
  auto& d = model.discriminator;
  d.x_norm = g.x_norm;
  d.y_norm = g.y_norm;
  d.encoder = nn::init_params(arch.encoder, derive_seed(cfg.seed, "encoder"));
  d.head = nn::init_params(arch.head, derive_seed(cfg.seed, "head"));
  return model;
}

namespace {

struct GenPass {
  Trace h1, decoder;
  const MatrixXd& output() const { return decoder.output(); }
};

struct DiscPass {
  Trace encoder, head;
  const MatrixXd& output() const { return head.output(); }
};

GenPass gen_forward(const GeneratorModel& g, const MatrixXd& z, const MatrixXd& xn) {
  MatrixXd input(z.rows() + xn.rows(), z.cols());
  input << z, xn;
  GenPass p;
  p.h1 = nn::forward(g.h1, input);
  p.decoder = nn::forward(g.decoder, p.h1.output());
  return p;
}

DiscPass disc_forward(const DiscriminatorModel& d, const MatrixXd& xn, const MatrixXd& yn) {
  DiscPass p;
  p.encoder = nn::forward(d.encoder, yn);
  MatrixXd input(xn.rows() + p.encoder.output().rows(), xn.cols());
  input << xn, p.encoder.output();
  p.head = nn::forward(d.head, input);
  return p;
}

struct DiscGrads {
  Grads encoder, head;
  MatrixXd expression;  // gradient w.r.t. the normalized expression input
};

DiscGrads disc_backward(const DiscriminatorModel& d, const DiscPass& p, const MatrixXd& out_grad) {
  DiscGrads g;
  g.head = nn::backprop(d.head, p.head, out_grad);
  const Index m = d.x_norm.mean.size();
  const MatrixXd enc_grad = g.head.input.bottomRows(g.head.input.rows() - m);
  g.encoder = nn::backprop(d.encoder, p.encoder, enc_grad);
  g.expression = g.encoder.input;
  return g;
}

double clamp_prob(double p) { return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp); }

MatrixXd gather_columns(const MatrixXd& cols, std::span<const Index> idx) {
  MatrixXd out(cols.rows(), Index(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(Index(j)) = cols.col(idx[j]);
  return out;
}

MatrixXd standard_normal(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  MatrixXd z(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) z(i, j) = unit(rng);
  return z;
}

bool has_two_distinct(const MatrixXd& chars) {
  for (Index i = 1; i < chars.rows(); ++i)
    if (chars.row(i) != chars.row(0)) return true;
  return false;
}

std::vector<Index> mismatch_rows_unchecked(std::span<const Index> batch, const MatrixXd& chars,
                                           Rng& rng) {
  std::uniform_int_distribution<Index> pick(0, chars.rows() - 1);
  std::vector<Index> out(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) {
    Index r;
    do {
      r = pick(rng);
    } while (chars.row(r) == chars.row(batch[j]));
    out[j] = r;
  }
  return out;
}

MatrixXd postprocess(const GeneratorModel& g, const TrainConfig& cfg, MatrixXd rows) {
  if (!g.image.empty() && cfg.smooth_images) return low_pass_filter_rows(rows, g.image);
  return rows;
}

}  // namespace

VectorXd generator_forward(const GeneratorModel& gen, const VectorXd& z, const VectorXd& x) {
  if (z.size() != gen.z_dim)
    throw InputError("generator_forward: z has " + std::to_string(z.size()) + " entries, expected " +
                     std::to_string(gen.z_dim));
  if (x.size() != gen.char_dim())
    throw InputError("generator_forward: x has " + std::to_string(x.size()) +
                     " entries, expected " + std::to_string(gen.char_dim()));
  const MatrixXd xn = gen.x_norm.to_columns(x.transpose());
  const GenPass p = gen_forward(gen, z, xn);
  return gen.y_norm.from_columns(p.output()).row(0).transpose();
}

double discriminator_forward(const DiscriminatorModel& disc, const VectorXd& x, const VectorXd& y) {
  if (x.size() != disc.x_norm.mean.size() || y.size() != disc.y_norm.mean.size())
    throw InputError("discriminator_forward: dimension mismatch");
  const DiscPass p =
      disc_forward(disc, disc.x_norm.to_columns(x.transpose()), disc.y_norm.to_columns(y.transpose()));
  return p.output()(0, 0);
}

double discriminator_loss(double d_real, double d_fake_y, double d_fake_x, double beta) {
  return std::log(clamp_prob(d_real)) + beta * std::log(1.0 - clamp_prob(d_fake_y)) +
         (1.0 - beta) * std::log(1.0 - clamp_prob(d_fake_x));
}

double generator_loss(double d_fake_y) { return std::log(clamp_prob(d_fake_y)); }

std::vector<Index> sample_mismatch_rows(std::span<const Index> batch, const PairedDataset& data,
                                        Rng& rng) {
  if (!has_two_distinct(data.characteristics))
    throw MismatchImpossible("all characteristic vectors are identical; no mismatched pair exists");
  for (Index b : batch)
    if (b < 0 || b >= data.size()) throw InputError("sample_mismatch: batch index out of range");
  return mismatch_rows_unchecked(batch, data.characteristics, rng);
}

MatrixXd sample_mismatch(std::span<const Index> batch, const PairedDataset& data, Rng& rng) {
  const auto rows = sample_mismatch_rows(batch, data, rng);
  return data.characteristics(rows, Eigen::all);
}

CtesModel train_ctes(const PairedDataset& data, const TrainConfig& cfg,
                     const TrainObserver& observer) {
  for (const auto& w : cfg.validate()) warn_once(w);
  data.validate();
  if (data.size() < 2) throw InputError("train_ctes: need at least 2 samples");
  if (!has_two_distinct(data.characteristics))
    throw MismatchImpossible("all characteristic vectors are identical; no mismatched pair exists");

  CtesModel model = init_model(data, cfg);
  auto& gen = model.generator;
  auto& disc = model.discriminator;
  const MatrixXd xn = gen.x_norm.to_columns(data.characteristics);
  const MatrixXd yn = gen.y_norm.to_columns(data.expressions);

  auto opt_h1 = nn::make_opt_state(gen.h1, cfg.optimizer);
  auto opt_dec = nn::make_opt_state(gen.decoder, cfg.optimizer);
  auto opt_enc = nn::make_opt_state(disc.encoder, cfg.optimizer);
  auto opt_head = nn::make_opt_state(disc.head, cfg.optimizer);

  Rng rng(derive_seed(cfg.seed, "train"));
  const Index n = data.size();
  const Index s = std::min<Index>(cfg.batch_size, n);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::vector<Index> batch(static_cast<std::size_t>(s));

  std::deque<double> d_deltas, g_deltas;
  double d_delta_sum = 0.0, g_delta_sum = 0.0;
  const double beta = cfg.beta;
  const double inv_s = 1.0 / double(s);

  for (std::size_t it = 0; it < std::size_t(cfg.iterations); ++it) {
    // s distinct rows by partial Fisher-Yates
    for (Index j = 0; j < s; ++j) {
      std::uniform_int_distribution<Index> pick(j, n - 1);
      std::swap(order[std::size_t(j)], order[std::size_t(pick(rng))]);
      batch[std::size_t(j)] = order[std::size_t(j)];
    }
    const std::vector<Index> mismatch = mismatch_rows_unchecked(batch, data.characteristics, rng);
    const MatrixXd xb = gather_columns(xn, batch);
    const MatrixXd yb = gather_columns(yn, batch);
    const MatrixXd xh = gather_columns(xn, mismatch);
    const MatrixXd z = standard_normal(cfg.z_dim, s, rng);

    const GenPass gp = gen_forward(gen, z, xb);
    const MatrixXd& y_hat = gp.output();

    IterationRecord rec;
    try {
      // Discriminator ascent on L_D (descent on -L_D).
      const DiscPass real = disc_forward(disc, xb, yb);
      const DiscPass fake_y = disc_forward(disc, xb, y_hat);
      const DiscPass fake_x = disc_forward(disc, xh, yb);
      double d_loss = 0.0;
      MatrixXd g_real(1, s), g_fy(1, s), g_fx(1, s);
      for (Index j = 0; j < s; ++j) {
        const double pr = real.output()(0, j), py = fake_y.output()(0, j), px = fake_x.output()(0, j);
        d_loss += discriminator_loss(pr, py, px, beta);
        g_real(0, j) = -inv_s / clamp_prob(pr);
        g_fy(0, j) = beta * inv_s / (1.0 - clamp_prob(py));
        g_fx(0, j) = (1.0 - beta) * inv_s / (1.0 - clamp_prob(px));
      }
      d_loss *= inv_s;
      DiscGrads dg = disc_backward(disc, real, g_real);
      const DiscGrads dgy = disc_backward(disc, fake_y, g_fy);
      const DiscGrads dgx = disc_backward(disc, fake_x, g_fx);
      nn::accumulate(dg.encoder, dgy.encoder);
      nn::accumulate(dg.encoder, dgx.encoder);
      nn::accumulate(dg.head, dgy.head);
      nn::accumulate(dg.head, dgx.head);
      nn::optimizer_step(disc.encoder, dg.encoder, opt_enc);
      nn::optimizer_step(disc.head, dg.head, opt_head);

      // Generator ascent on L_G = log D(x, y_hat) against the updated D.
      const DiscPass fooled = disc_forward(disc, xb, y_hat);
      double g_loss = 0.0;
      MatrixXd g_out(1, s);
      for (Index j = 0; j < s; ++j) {
        const double p = fooled.output()(0, j);
        g_loss += generator_loss(p);
        g_out(0, j) = -inv_s / clamp_prob(p);
      }
      g_loss *= inv_s;
      const DiscGrads through = disc_backward(disc, fooled, g_out);
      const Grads dec_grads = nn::backprop(gen.decoder, gp.decoder, through.expression);
      const Grads h1_grads = nn::backprop(gen.h1, gp.h1, dec_grads.input);
      nn::optimizer_step(gen.decoder, dec_grads, opt_dec);
      nn::optimizer_step(gen.h1, h1_grads, opt_h1);

      if (!std::isfinite(d_loss) || !std::isfinite(g_loss))
        throw TrainingDiverged(it, "non-finite loss");

      rec.loss = {d_loss, g_loss};
      if (observer) {
        rec.iteration = it;
        rec.batch = batch;
        rec.mismatch = mismatch;
        rec.d_real = real.output().row(0);
        rec.d_fake_y = fake_y.output().row(0);
        rec.d_fake_x = fake_x.output().row(0);
        observer(rec);
      }
    } catch (const nn::NonFiniteGradient& e) {
      throw TrainingDiverged(it, e.what());
    }

    if (!model.losses.empty()) {
      const double dd = std::abs(rec.loss.d_loss - model.losses.back().d_loss);
      const double dgl = std::abs(rec.loss.g_loss - model.losses.back().g_loss);
      d_deltas.push_back(dd);
      g_deltas.push_back(dgl);
      d_delta_sum += dd;
      g_delta_sum += dgl;
      if (d_deltas.size() > std::size_t(cfg.convergence_window)) {
        d_delta_sum -= d_deltas.front();
        g_delta_sum -= g_deltas.front();
        d_deltas.pop_front();
        g_deltas.pop_front();
      }
    }
    model.losses.push_back(rec.loss);
    const double window = double(cfg.convergence_window);
    if (d_deltas.size() == std::size_t(cfg.convergence_window) &&
        d_delta_sum / window < cfg.convergence_tol && g_delta_sum / window < cfg.convergence_tol) {
      model.converged = true;
      logger()->debug("train_ctes: converged after {} iterations", it + 1);
      break;
    }
  }
  return model;
}

MatrixXd synthesize(const CtesModel& model, const VectorXd& x, int count, Rng& rng, double jitter) {
  if (count < 1) throw InputError("synthesize: count must be >= 1");
  if (jitter < 0.0) throw InputError("synthesize: jitter must be >= 0");
  const auto& g = model.generator;
  if (x.size() != g.char_dim())
    throw InputError("synthesize: x has " + std::to_string(x.size()) + " entries, expected " +
                     std::to_string(g.char_dim()));
  MatrixXd rows = x.transpose().replicate(count, 1);
  return synthesize_rows(model, rows, rng, jitter);
}

MatrixXd synthesize_rows(const CtesModel& model, const MatrixXd& x_rows, Rng& rng, double jitter) {
  if (jitter < 0.0) throw InputError("synthesize: jitter must be >= 0");
  const auto& g = model.generator;
  if (x_rows.cols() != g.char_dim())
    throw InputError("synthesize: characteristics have " + std::to_string(x_rows.cols()) +
                     " columns, expected " + std::to_string(g.char_dim()));
  const Index count = x_rows.rows();
  std::normal_distribution<double> unit(0.0, 1.0);
  MatrixXd x = x_rows;
  MatrixXd z(g.z_dim, count);
  for (Index r = 0; r < count; ++r) {
    if (jitter > 0.0)
      for (Index j = 0; j < x.cols(); ++j) x(r, j) += jitter * unit(rng);
    for (Index i = 0; i < g.z_dim; ++i) z(i, r) = unit(rng);
  }
  const GenPass p = gen_forward(g, z, g.x_norm.to_columns(x));
  return postprocess(g, model.config, g.y_norm.from_columns(p.output()));
}

MinimaxOracle toy_minimax_oracle(const VectorXd& p_data, const VectorXd& p_g,
                                 const VectorXd& p_prime, double beta) {
  if (p_data.size() != p_g.size() || p_data.size() != p_prime.size())
    throw InputError("toy_minimax_oracle: pmfs must share a support");
  if (!(beta >= 0.0 && beta <= 1.0)) throw InputError("toy_minimax_oracle: beta outside [0, 1]");
  for (const VectorXd* p : {&p_data, &p_g, &p_prime}) {
    if ((p->array() < 0.0).any()) throw InputError("toy_minimax_oracle: negative probability");
    if (std::abs(p->sum() - 1.0) > 1e-12) throw InputError("toy_minimax_oracle: pmf does not sum to 1");
  }
  MinimaxOracle out;
  out.d_star.resize(p_data.size());
  for (Index i = 0; i < p_data.size(); ++i) {
    const double mix = beta * p_g[i] + (1.0 - beta) * p_prime[i];
    const double total = p_data[i] + mix;
    if (total <= 0.0) {
      out.d_star[i] = 0.5;
      continue;
    }
    const double d = p_data[i] / total;
    out.d_star[i] = d;
    if (p_data[i] > 0.0) out.value += p_data[i] * std::log(d);
    if (mix > 0.0) out.value += mix * std::log(mix / total);
  }
  return out;
}

}  // namespace ctes
