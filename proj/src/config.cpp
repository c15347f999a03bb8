#include "ctes/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "ctes/errors.hpp"

namespace ctes {

using nlohmann::json;

std::string to_string(Study s) {
  switch (s) {
    case Study::multivariate: return "multivariate";
    case Study::scalar_to_matrix: return "scalar-to-matrix";
    case Study::tabular_risk: return "tabular-risk";
  }
  return "?";
}

namespace {

Study parse_study(const std::string& s, const std::string& path) {
  if (s == "multivariate") return Study::multivariate;
  if (s == "scalar-to-matrix") return Study::scalar_to_matrix;
  if (s == "tabular-risk") return Study::tabular_risk;
  throw ConfigError(path + ": unknown study '" + s +
                    "' (expected multivariate, scalar-to-matrix or tabular-risk)");
}

/// Reads one object level, remembering which keys were consumed.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(field(key) + ": wrong type");
    }
    if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!j_.at(key).is_number_integer()) throw ConfigError(field(key) + ": expected an integer");
    }
  }

  std::optional<Reader> child(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key)) return std::nullopt;
    return Reader(j_.at(key), field(key));
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& at(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }
  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(field(it.key().c_str()) + ": unknown field");
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

void ExperimentConfig::validate() const {
  if (trials < 1) throw ConfigError("trials: must be >= 1");
  if (replicates < 1) throw ConfigError("replicates: must be >= 1");
  if (workers < 1) throw ConfigError("workers: must be >= 1");
  if (methods.empty()) throw ConfigError("methods: at least one method required");
  for (std::size_t i = 0; i < methods.size(); ++i) {
    try {
      parse_method(methods[i]);
    } catch (const ConfigError& e) {
      throw ConfigError("methods[" + std::to_string(i) + "]: " + e.what());
    }
  }
  if (study != Study::tabular_risk) {
    if (sigmas.empty()) throw ConfigError("sigmas: at least one value required");
    for (std::size_t i = 0; i < sigmas.size(); ++i)
      if (!(sigmas[i] > 0.0))
        throw ConfigError("sigmas[" + std::to_string(i) + "]: sigma must be positive");
  }
  for (std::size_t i = 0; i < groups.size(); ++i)
    if (groups[i] < 1) throw ConfigError("groups[" + std::to_string(i) + "]: must be >= 1");
  if (h < 1) throw ConfigError("ensemble.h: must be >= 1");
  if (k <= 2 * h)
    throw ConfigError("ensemble.k: k must be larger than 2h (k = " + std::to_string(k) +
                      ", h = " + std::to_string(h) + ")");
  try {
    train.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(e.what()));
  }
  forest.validate();
  if (study == Study::multivariate) {
    SimConfig s = sim;
    for (double sigma : sigmas) {
      s.sigma = sigma;
      s.validate();
    }
  }
  if (study == Study::scalar_to_matrix) gp.validate();
  if (study == Study::tabular_risk && tabular_path.empty())
    throw ConfigError("tabular.path: required for the tabular-risk study");
  if (tabular_bins < 2) throw ConfigError("tabular.bins: must be >= 2");
  if (cnn.epochs < 1 || cnn.batch_size < 1 || !(cnn.learning_rate > 0.0))
    throw ConfigError("cnn: epochs and batch_size must be >= 1, learning_rate > 0");
  for (std::size_t i = 0; i < beta_sweep.betas.size(); ++i)
    if (!(beta_sweep.betas[i] >= 0.0 && beta_sweep.betas[i] <= 1.0))
      throw ConfigError("beta_sweep.betas[" + std::to_string(i) + "]: must lie in [0, 1]");
  if (beta_sweep.enabled && !is_gan(parse_method(beta_sweep.method)))
    throw ConfigError("beta_sweep.method: must be an adversarial method");
}

MethodSettings ExperimentConfig::method_settings() const {
  MethodSettings m;
  m.train = train;
  m.ensemble.k = k;
  m.ensemble.h = h;
  m.ensemble.member = train;
  m.ensemble.classifier = eval_settings().classifier;
  m.pls_components = pls_components;
  m.grnn_bandwidth = grnn_bandwidth;
  return m;
}

EvalSettings ExperimentConfig::eval_settings() const {
  EvalSettings e;
  e.replicates = replicates;
  e.subsample_merged = subsample_merged;
  e.classifier.forest = forest;
  e.classifier.cnn = cnn;
  if (study == Study::scalar_to_matrix) {
    e.classifier.kind = ClassifierKind::cnn;
    e.classifier.image = {gp.side, gp.side};
  }
  return e;
}

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  Reader r(j, "");
  std::string study = to_string(c.study);
  r.get("study", study);
  c.study = parse_study(study, "study");
  r.get("seed", c.seed);
  r.get("sigmas", c.sigmas);
  r.get("groups", c.groups);
  r.get("trials", c.trials);
  r.get("replicates", c.replicates);
  r.get("redraw_data", c.redraw_data);
  r.get("subsample_merged", c.subsample_merged);
  r.get("methods", c.methods);
  r.get("workers", c.workers);
  r.get("output", c.output);

  if (auto d = r.child("data")) {
    d->get("samples_per_group", c.sim.samples_per_group);
    d->get("groups", c.sim.groups);
    d->get("noise_std", c.sim.noise_std);
    d->get("shared_noise", c.sim.shared_noise);
    d->finish();
  }
  if (auto g = r.child("gp")) {
    g->get("side", c.gp.side);
    g->get("images_per_category", c.gp.images_per_category);
    g->get("categories", c.gp.categories);
    g->get("char_dim", c.gp.char_dim);
    g->get("length_scales", c.gp.length_scales);
    g->get("jitter", c.gp.jitter);
    g->finish();
  }
  if (auto t = r.child("tabular")) {
    t->get("path", c.tabular_path);
    t->get("bins", c.tabular_bins);
    t->finish();
  }
  if (auto t = r.child("train")) {
    t->get("beta", c.train.beta);
    t->get("batch_size", c.train.batch_size);
    t->get("iterations", c.train.iterations);
    t->get("z_dim", c.train.z_dim);
    t->get("hidden", c.train.hidden);
    std::string opt = "adam";
    t->get("optimizer", opt);
    if (opt == "adam")
      c.train.optimizer.kind = nn::OptimizerKind::adam;
    else if (opt == "sgd")
      c.train.optimizer.kind = nn::OptimizerKind::sgd;
    else
      throw ConfigError("train.optimizer: expected adam or sgd, got '" + opt + "'");
    t->get("learning_rate", c.train.optimizer.learning_rate);
    t->get("beta1", c.train.optimizer.beta1);
    t->get("beta2", c.train.optimizer.beta2);
    t->get("epsilon", c.train.optimizer.epsilon);
    t->get("convergence_window", c.train.convergence_window);
    t->get("convergence_tol", c.train.convergence_tol);
    t->get("jitter", c.train.jitter);
    t->get("smooth_images", c.train.smooth_images);
    t->finish();
  }
  if (auto e = r.child("ensemble")) {
    e->get("k", c.k);
    e->get("h", c.h);
    e->finish();
  }
  if (auto f = r.child("forest")) {
    f->get("trees", c.forest.trees);
    f->get("max_depth", c.forest.max_depth);
    f->get("min_samples_split", c.forest.min_samples_split);
    f->get("max_features", c.forest.max_features);
    f->get("bootstrap", c.forest.bootstrap);
    f->finish();
  }
  if (auto n = r.child("cnn")) {
    n->get("epochs", c.cnn.epochs);
    n->get("batch_size", c.cnn.batch_size);
    n->get("learning_rate", c.cnn.learning_rate);
    n->finish();
  }
  if (auto b = r.child("baselines")) {
    b->get("pls_components", c.pls_components);
    if (b->has("grnn_bandwidth") && !b->at("grnn_bandwidth").is_null()) {
      double bw = 0.0;
      b->get("grnn_bandwidth", bw);
      if (!(bw > 0.0)) throw ConfigError("baselines.grnn_bandwidth: must be > 0");
      c.grnn_bandwidth = bw;
    }
    b->finish();
  }
  if (auto s = r.child("beta_sweep")) {
    s->get("enabled", c.beta_sweep.enabled);
    s->get("betas", c.beta_sweep.betas);
    s->get("method", c.beta_sweep.method);
    s->finish();
  }
  r.finish();
  c.validate();
  return c;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what(), e.byte);
  }
  return parse_config(j);
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["study"] = to_string(c.study);
  j["seed"] = c.seed;
  j["sigmas"] = c.sigmas;
  j["groups"] = c.groups;
  j["trials"] = c.trials;
  j["replicates"] = c.replicates;
  j["redraw_data"] = c.redraw_data;
  j["subsample_merged"] = c.subsample_merged;
  j["methods"] = c.methods;
  j["workers"] = c.workers;
  j["output"] = c.output;
  j["data"] = {{"samples_per_group", c.sim.samples_per_group},
               {"groups", c.sim.groups},
               {"noise_std", c.sim.noise_std},
               {"shared_noise", c.sim.shared_noise}};
  j["gp"] = {{"side", c.gp.side},
             {"images_per_category", c.gp.images_per_category},
             {"categories", c.gp.categories},
             {"char_dim", c.gp.char_dim},
             {"length_scales", c.gp.length_scales},
             {"jitter", c.gp.jitter}};
  j["tabular"] = {{"path", c.tabular_path}, {"bins", c.tabular_bins}};
  j["train"] = {{"beta", c.train.beta},
                {"batch_size", c.train.batch_size},
                {"iterations", c.train.iterations},
                {"z_dim", c.train.z_dim},
                {"hidden", c.train.hidden},
                {"optimizer", c.train.optimizer.kind == nn::OptimizerKind::adam ? "adam" : "sgd"},
                {"learning_rate", c.train.optimizer.learning_rate},
                {"beta1", c.train.optimizer.beta1},
                {"beta2", c.train.optimizer.beta2},
                {"epsilon", c.train.optimizer.epsilon},
                {"convergence_window", c.train.convergence_window},
                {"convergence_tol", c.train.convergence_tol},
                {"jitter", c.train.jitter},
                {"smooth_images", c.train.smooth_images}};
  j["ensemble"] = {{"k", c.k}, {"h", c.h}};
  j["forest"] = {{"trees", c.forest.trees},
                 {"max_depth", c.forest.max_depth},
                 {"min_samples_split", c.forest.min_samples_split},
                 {"max_features", c.forest.max_features},
                 {"bootstrap", c.forest.bootstrap}};
  j["cnn"] = {{"epochs", c.cnn.epochs},
              {"batch_size", c.cnn.batch_size},
              {"learning_rate", c.cnn.learning_rate}};
  j["baselines"] = {{"pls_components", c.pls_components},
                    {"grnn_bandwidth", c.grnn_bandwidth ? json(*c.grnn_bandwidth) : json(nullptr)}};
  j["beta_sweep"] = {{"enabled", c.beta_sweep.enabled},
                     {"betas", c.beta_sweep.betas},
                     {"method", c.beta_sweep.method}};
  return j;
}

}  // namespace ctes
