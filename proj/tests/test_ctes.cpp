#include <doctest.h>

#include <cmath>
#include <set>

#include "ctes/ctes.hpp"
#include "ctes/datagen.hpp"
#include "ctes/errors.hpp"

using namespace ctes;

namespace {

PairedDataset line_toy(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 0.01);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PairedDataset d;
  d.characteristics.resize(n, 1);
  d.expressions.resize(n, 1);
  for (int i = 0; i < n; ++i) {
    d.characteristics(i, 0) = u(rng);
    d.expressions(i, 0) = d.characteristics(i, 0) + noise(rng);
  }
  d.groups = VectorXi::Ones(n);
  d.num_groups = 1;
  return d;
}

PairedDataset small_multivariate(std::uint64_t seed) {
  SimConfig sim;
  sim.samples_per_group = 40;
  sim.seed = seed;
  return gen_multivariate_dataset(sim);
}

void zero_out(nn::Network<double>& net) {
  for (auto& l : net.layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
}

double mean_abs_error(const CtesModel& m, const PairedDataset& d, std::uint64_t seed) {
  Rng rng(seed);
  const MatrixXd y = synthesize_rows(m, d.characteristics, rng);
  return (y - d.expressions).cwiseAbs().mean();
}

// V at D = D*, summed independently of the library.
double oracle_value(const VectorXd& pd, const VectorXd& pg, const VectorXd& pp, double beta) {
  double v = 0.0;
  for (Eigen::Index i = 0; i < pd.size(); ++i) {
    const double mix = beta * pg[i] + (1 - beta) * pp[i];
    const double total = pd[i] + mix;
    if (total == 0.0) continue;
    if (pd[i] > 0) v += pd[i] * std::log(pd[i] / total);
    if (mix > 0) v += mix * std::log(mix / total);
  }
  return v;
}

VectorXd random_pmf(Rng& rng, int n) {
  std::exponential_distribution<double> e(1.0);
  VectorXd p(n);
  for (int i = 0; i < n; ++i) p[i] = e(rng);
  return p / p.sum();
}

}  // namespace

TEST_CASE("default training settings") {
  const TrainConfig cfg;
  CHECK(cfg.beta == 0.9);
  CHECK(cfg.batch_size == 50);
  CHECK(cfg.iterations == 1000);
  CHECK(cfg.z_dim == 8);
  CHECK(cfg.convergence_window == 50);
  CHECK(cfg.convergence_tol == 1e-4);
  CHECK(cfg.validate().empty());
}

TEST_CASE("training config validation") {
  TrainConfig cfg;
  cfg.beta = 1.2;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.beta = 0.9;
  cfg.batch_size = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.batch_size = 50;
  cfg.jitter = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.jitter = 0.0;
  cfg.beta = 0.5;
  CHECK(cfg.validate().size() == 1);
  cfg.beta = 0.0;
  CHECK(cfg.validate().size() == 1);
}

TEST_CASE("normalizer round trip and constant columns") {
  MatrixXd rows(4, 2);
  rows << 1, 5, 2, 5, 3, 5, 4, 5;
  const auto n = Normalizer::fit(rows);
  CHECK(n.mean[0] == doctest::Approx(2.5));
  CHECK(n.scale[0] == doctest::Approx(std::sqrt(1.25)));
  CHECK(n.scale[1] == 1.0);
  const MatrixXd cols = n.to_columns(rows);
  CHECK(cols.rows() == 2);
  CHECK(cols.row(0).mean() == doctest::Approx(0.0));
  CHECK(cols.row(1).isZero(0.0));
  CHECK((n.from_columns(cols) - rows).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("architecture shapes") {
  TrainConfig cfg;
  const auto a = make_architecture(2, 6, cfg);
  CHECK(a.h1.front().input_size() == cfg.z_dim + 2);
  CHECK(a.decoder.back().output_size() == 6);
  CHECK(a.decoder.back().activation == nn::Activation::none);
  CHECK(a.head.back().output_size() == 1);
  CHECK(a.head.back().activation == nn::Activation::sigmoid);
  CHECK(a.head.front().input_size() == 2 + a.encoder.back().output_size());

  const auto img = make_architecture(64, 256, cfg, ImageShape{16, 16});
  CHECK(img.decoder.size() == 4);
  CHECK(img.encoder.size() == 4);
  CHECK(img.decoder.back().output_size() == 256);
  CHECK(img.decoder.back().activation == nn::Activation::none);
  CHECK(img.decoder.front().conv.in_channels == 64);
  CHECK(img.encoder.back().conv.out_channels == 64);
  CHECK_THROWS_AS(make_architecture(64, 100, cfg, ImageShape{10, 10}), ConfigError);
}

TEST_CASE("zero parameters give the mean expression and an even score") {
  const auto data = small_multivariate(3);
  auto model = init_model(data, TrainConfig{});
  zero_out(model.generator.h1);
  zero_out(model.generator.decoder);
  zero_out(model.discriminator.encoder);
  zero_out(model.discriminator.head);
  const VectorXd x = data.characteristics.row(5).transpose();
  const VectorXd y = generator_forward(model.generator, VectorXd::Ones(8), x);
  CHECK(y.size() == 6);
  CHECK((y - data.expressions.colwise().mean().transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(discriminator_forward(model.discriminator, x, y) == 0.5);
}

TEST_CASE("forward passes are deterministic, bounded and shape-checked") {
  const auto data = small_multivariate(4);
  const auto model = init_model(data, TrainConfig{});
  const VectorXd x = data.characteristics.row(0).transpose();
  const VectorXd z = VectorXd::LinSpaced(8, -1.0, 1.0);
  CHECK(generator_forward(model.generator, z, x) == generator_forward(model.generator, z, x));
  const VectorXd y = data.expressions.row(3).transpose();
  const double s = discriminator_forward(model.discriminator, x, y);
  CHECK(s > 0.0);
  CHECK(s < 1.0);
  CHECK(s == discriminator_forward(model.discriminator, x, y));
  CHECK_THROWS_AS(generator_forward(model.generator, VectorXd::Zero(7), x), InputError);
  CHECK_THROWS_AS(generator_forward(model.generator, z, VectorXd::Zero(3)), InputError);
  CHECK_THROWS_AS(discriminator_forward(model.discriminator, x, VectorXd::Zero(5)), InputError);
}

TEST_CASE("loss values") {
  CHECK(discriminator_loss(0.5, 0.5, 0.5, 0.3) == doctest::Approx(2 * std::log(0.5)));
  const double expected = std::log(0.9) + 0.9 * std::log(0.9) + 0.1 * std::log(0.8);
  CHECK(discriminator_loss(0.9, 0.1, 0.2, 0.9) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(-0.222499).epsilon(1e-6));
  CHECK(discriminator_loss(0.7, 0.2, 0.3, 1.0) == discriminator_loss(0.7, 0.2, 0.9, 1.0));
  CHECK(generator_loss(0.5) == doctest::Approx(std::log(0.5)));
  CHECK(generator_loss(1 - 1e-7) == doctest::Approx(-1e-7).epsilon(1e-6));
  CHECK(generator_loss(0.3) < generator_loss(0.4));
  CHECK(std::isfinite(discriminator_loss(0.0, 1.0, 1.0, 0.5)));
  CHECK(generator_loss(0.0) == doctest::Approx(std::log(1e-7)));
}

TEST_CASE("loss properties over a grid of scores") {
  for (double a = 0.05; a < 1.0; a += 0.15)
    for (double b = 0.05; b < 1.0; b += 0.15)
      for (double c = 0.05; c < 1.0; c += 0.15) {
        // beta = 1 collapses to the two-term conditional objective
        CHECK(discriminator_loss(a, b, c, 1.0) == std::log(a) + std::log(1 - b));
        const double mid = discriminator_loss(a, b, c, 0.5);
        const double avg = 0.5 * (discriminator_loss(a, b, c, 0.0) + discriminator_loss(a, b, c, 1.0));
        CHECK(std::abs(mid - avg) <= 1e-14);
      }
}

TEST_CASE("mismatch sampling") {
  SUBCASE("two samples force the other row") {
    PairedDataset d;
    d.characteristics.resize(2, 1);
    d.characteristics << 1.0, 2.0;
    d.expressions = d.characteristics;
    d.groups = VectorXi::Ones(2);
    d.num_groups = 1;
    Rng rng(1);
    const std::vector<Index> batch{0, 1, 1, 0};
    const MatrixXd m = sample_mismatch(batch, d, rng);
    CHECK(m(0, 0) == 2.0);
    CHECK(m(1, 0) == 1.0);
    CHECK(m(2, 0) == 1.0);
    CHECK(m(3, 0) == 2.0);
  }
  SUBCASE("identical characteristics are rejected") {
    PairedDataset d;
    d.characteristics = MatrixXd::Ones(5, 2);
    d.expressions = MatrixXd::Zero(5, 1);
    d.groups = VectorXi::Ones(5);
    d.num_groups = 1;
    Rng rng(1);
    const std::vector<Index> batch{0, 1};
    CHECK_THROWS_AS(sample_mismatch(batch, d, rng), MismatchImpossible);
  }
  SUBCASE("a batch of 50 from 800 rows") {
    SimConfig sim;
    sim.samples_per_group = 200;
    sim.groups = 4;
    const auto d = gen_multivariate_dataset(sim);
    REQUIRE(d.size() == 800);
    std::vector<Index> batch;
    for (Index i = 0; i < 50; ++i) batch.push_back(i * 16);
    Rng r1(9), r2(9);
    const MatrixXd m = sample_mismatch(batch, d, r1);
    CHECK(m.rows() == 50);
    for (Index j = 0; j < 50; ++j) CHECK(m.row(j) != d.characteristics.row(batch[j]));
    CHECK(m == sample_mismatch(batch, d, r2));
  }
  SUBCASE("draws are uniform over eligible rows") {
    PairedDataset d;
    d.characteristics.resize(4, 1);
    d.characteristics << 0.0, 1.0, 1.0, 2.0;
    d.expressions = d.characteristics;
    d.groups = VectorXi::Ones(4);
    d.num_groups = 1;
    Rng rng(3);
    std::vector<Index> batch(20000, 1);
    const auto rows = sample_mismatch_rows(batch, d, rng);
    int zeros = 0;
    for (auto r : rows) {
      CHECK(r != 1);
      CHECK(r != 2);
      zeros += r == 0;
    }
    // p = 1/2, standard deviation of the count is about 71
    CHECK(std::abs(zeros - 10000) < 400);
  }
}

TEST_CASE("training run invariants") {
  const auto data = small_multivariate(5);
  TrainConfig cfg;
  cfg.iterations = 120;
  cfg.seed = 17;
  std::size_t iterations = 0;
  bool scores_in_range = true, mismatches_valid = true;
  const auto model = train_ctes(data, cfg, [&](const IterationRecord& rec) {
    ++iterations;
    for (const auto* s : {&rec.d_real, &rec.d_fake_y, &rec.d_fake_x})
      scores_in_range = scores_in_range && (s->array() > 0.0).all() && (s->array() < 1.0).all();
    CHECK(rec.batch.size() == 50);
    CHECK(rec.mismatch.size() == 50);
    for (std::size_t j = 0; j < rec.batch.size(); ++j)
      mismatches_valid = mismatches_valid && data.characteristics.row(rec.batch[j]) !=
                                                 data.characteristics.row(rec.mismatch[j]);
  });
  CHECK(scores_in_range);
  CHECK(mismatches_valid);
  CHECK(iterations == model.losses.size());
  CHECK(model.losses.size() <= 120);
  CHECK(model.generator.expr_dim() == 6);
  CHECK(model.generator.y_norm.mean == model.discriminator.y_norm.mean);
  CHECK(model.generator.x_norm.scale == model.discriminator.x_norm.scale);

  const auto again = train_ctes(data, cfg);
  CHECK(again.losses.size() == model.losses.size());
  for (std::size_t l = 0; l < model.generator.decoder.layers.size(); ++l)
    CHECK(again.generator.decoder.layers[l].weight == model.generator.decoder.layers[l].weight);
  CHECK(again.losses.back().d_loss == model.losses.back().d_loss);
}

TEST_CASE("training improves a one-dimensional identity map") {
  const auto data = line_toy(400, 1);
  TrainConfig cfg;
  cfg.seed = 2;
  const double before = mean_abs_error(init_model(data, cfg), data, 5);
  const auto trained = train_ctes(data, cfg);
  const double after = mean_abs_error(trained, data, 5);
  MESSAGE("mean abs error before " << before << " after " << after);
  CHECK(after < before);
}

TEST_CASE("a huge learning rate diverges with the iteration index") {
  const auto data = small_multivariate(6);
  TrainConfig cfg;
  cfg.iterations = 200;
  cfg.optimizer.kind = nn::OptimizerKind::sgd;
  cfg.optimizer.learning_rate = 1e200;
  try {
    train_ctes(data, cfg);
    FAIL("training did not diverge");
  } catch (const TrainingDiverged& e) {
    CHECK(e.iteration() < 200);
  }
}

TEST_CASE("synthesis counts, determinism and jitter") {
  const auto data = small_multivariate(7);
  TrainConfig cfg;
  cfg.iterations = 100;
  const auto model = train_ctes(data, cfg);
  const VectorXd x = data.characteristics.row(0).transpose();
  Rng a(4), b(4);
  const MatrixXd s1 = synthesize(model, x, 100, a);
  CHECK(s1.rows() == 100);
  CHECK(s1.cols() == 6);
  CHECK(s1 == synthesize(model, x, 100, b));

  Rng c(8), d(8);
  const MatrixXd plain = synthesize(model, x, 1000, c, 0.0);
  const MatrixXd jittered = synthesize(model, x, 1000, d, 0.5);
  const auto var = [](const MatrixXd& m) {
    return ((m.rowwise() - m.colwise().mean()).array().square().colwise().sum() / (m.rows() - 1))
        .eval();
  };
  CHECK((var(jittered) > var(plain)).all());
  Rng e(1);
  CHECK_THROWS_AS(synthesize(model, x, 0, e), InputError);
  CHECK_THROWS_AS(synthesize(model, x, 5, e, -1.0), InputError);
  CHECK_THROWS_AS(synthesize(model, VectorXd::Zero(3), 5, e), InputError);
}

TEST_CASE("optimal discriminator oracle") {
  SUBCASE("identical distributions") {
    const VectorXd p = (VectorXd(4) << 0.1, 0.2, 0.3, 0.4).finished();
    const auto r = toy_minimax_oracle(p, p, p, 0.7);
    CHECK((r.d_star.array() - 0.5).abs().maxCoeff() < 1e-15);
    CHECK(r.value == doctest::Approx(-std::log(4.0)).epsilon(1e-12));
  }
  SUBCASE("disjoint two-point supports") {
    const VectorXd pd = (VectorXd(2) << 1, 0).finished();
    const VectorXd pg = (VectorXd(2) << 0, 1).finished();
    const auto r = toy_minimax_oracle(pd, pg, pd, 1.0);
    CHECK(r.d_star[0] == 1.0);
    CHECK(r.d_star[1] == 0.0);
    CHECK(r.value == 0.0);
  }
  SUBCASE("exact mixture at beta one half") {
    const VectorXd pd = (VectorXd(3) << 0.5, 0.3, 0.2).finished();
    const VectorXd pg = (VectorXd(3) << 0.6, 0.2, 0.2).finished();
    const VectorXd pp = 2 * pd - pg;  // 0.4, 0.4, 0.2
    const auto r = toy_minimax_oracle(pd, pg, pp, 0.5);
    CHECK(r.value == doctest::Approx(-std::log(4.0)).epsilon(1e-12));
  }
  SUBCASE("zero-mass points are skipped") {
    const VectorXd pd = (VectorXd(3) << 0.5, 0.5, 0).finished();
    const auto r = toy_minimax_oracle(pd, pd, pd, 0.9);
    CHECK(r.d_star[2] == 0.5);
    CHECK(r.value == doctest::Approx(-std::log(4.0)));
  }
  SUBCASE("invalid inputs") {
    const VectorXd ok = (VectorXd(2) << 0.5, 0.5).finished();
    const VectorXd bad = (VectorXd(2) << 0.5, 0.6).finished();
    const VectorXd neg = (VectorXd(2) << 1.5, -0.5).finished();
    CHECK_THROWS_AS(toy_minimax_oracle(ok, bad, ok, 0.5), InputError);
    CHECK_THROWS_AS(toy_minimax_oracle(ok, neg, ok, 0.5), InputError);
    CHECK_THROWS_AS(toy_minimax_oracle(ok, ok, ok, 1.5), InputError);
    CHECK_THROWS_AS(toy_minimax_oracle(ok, VectorXd::Ones(3) / 3, ok, 0.5), InputError);
  }
}

TEST_CASE("the objective at the optimal discriminator is bounded below by -log 4") {
  Rng rng(12);
  std::uniform_real_distribution<double> ub(0.0, 1.0);
  const double floor = -std::log(4.0);
  for (int t = 0; t < 500; ++t) {
    const int n = 2 + t % 6;
    const double beta = ub(rng);
    const VectorXd pd = random_pmf(rng, n), pg = random_pmf(rng, n), pp = random_pmf(rng, n);
    const auto r = toy_minimax_oracle(pd, pg, pp, beta);
    CHECK(r.value >= floor - 1e-9);
    CHECK(std::abs(r.value - oracle_value(pd, pg, pp, beta)) < 1e-12);
    const VectorXd mix = beta * pg + (1 - beta) * pp;
    CHECK(((r.d_star - pd.cwiseQuotient(pd + mix)).cwiseAbs().maxCoeff()) < 1e-15);
    // strict unless the mixture reproduces the data distribution
    if ((mix - pd).cwiseAbs().maxCoeff() > 1e-3) CHECK(r.value > floor + 1e-9);
  }
  for (int t = 0; t < 200; ++t) {
    // pick beta and p_g, then solve for p_prime so the mixture is exact
    const int n = 3 + t % 4;
    const VectorXd pd = random_pmf(rng, n), pg = random_pmf(rng, n);
    double beta = 1.0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (pg[i] > pd[i]) beta = std::min(beta, pd[i] / pg[i]);
    beta *= ub(rng);
    if (beta <= 0.0) continue;
    const VectorXd pp = ((pd - beta * pg) / (1 - beta)).cwiseMax(0.0);
    const VectorXd ppn = pp / pp.sum();
    const auto r = toy_minimax_oracle(pd, pg, ppn, beta);
    CHECK(std::abs(r.value - floor) <= 1e-9);
  }
}
