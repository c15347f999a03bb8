#include "ctes/model_io.hpp"

#include <fstream>
#include <sstream>

#include "ctes/errors.hpp"

namespace ctes {

using nlohmann::json;

namespace {

json matrix_json(const MatrixXd& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()},
          {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

MatrixXd matrix_from(const json& j) {
  const Index rows = j.at("rows").get<Index>(), cols = j.at("cols").get<Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || Index(data.size()) != rows * cols)
    throw ParseError("matrix data length does not match its shape");
  return Eigen::Map<const MatrixXd>(data.data(), rows, cols);
}

json vector_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

VectorXd vector_from(const json& j) {
  const auto data = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(data.data(), Index(data.size()));
}

nn::LayerKind layer_kind_from(const std::string& s) {
  for (auto k : {nn::LayerKind::dense, nn::LayerKind::conv2d, nn::LayerKind::conv_transpose2d})
    if (nn::to_string(k) == s) return k;
  throw ParseError("unknown layer kind '" + s + "'");
}

nn::Activation activation_from(const std::string& s) {
  for (auto a : {nn::Activation::none, nn::Activation::relu, nn::Activation::sigmoid})
    if (nn::to_string(a) == s) return a;
  throw ParseError("unknown activation '" + s + "'");
}

json network_json(const nn::Network<double>& net) {
  json layers = json::array();
  for (std::size_t i = 0; i < net.spec.size(); ++i) {
    const auto& s = net.spec[i];
    json l = {{"kind", nn::to_string(s.kind)},
              {"activation", nn::to_string(s.activation)},
              {"weight", matrix_json(net.layers[i].weight)},
              {"bias", vector_json(net.layers[i].bias)}};
    if (s.kind == nn::LayerKind::dense) {
      l["inputs"] = s.inputs;
      l["outputs"] = s.outputs;
    } else {
      const auto& g = s.conv;
      l["conv"] = {{"in_channels", g.in_channels}, {"out_channels", g.out_channels},
                   {"in_height", g.in_height},     {"in_width", g.in_width},
                   {"kernel", g.kernel},           {"stride", g.stride},
                   {"padding", g.padding}};
    }
    layers.push_back(std::move(l));
  }
  return layers;
}

nn::Network<double> network_from(const json& j) {
  nn::Network<double> net;
  for (const auto& l : j) {
    const auto kind = layer_kind_from(l.at("kind").get<std::string>());
    const auto act = activation_from(l.at("activation").get<std::string>());
    nn::LayerSpec s;
    if (kind == nn::LayerKind::dense) {
      s = nn::dense(l.at("inputs").get<int>(), l.at("outputs").get<int>(), act);
    } else {
      const auto& c = l.at("conv");
      nn::ConvGeometry g{c.at("in_channels").get<int>(), c.at("out_channels").get<int>(),
                         c.at("in_height").get<int>(),   c.at("in_width").get<int>(),
                         c.at("kernel").get<int>(),      c.at("stride").get<int>(),
                         c.at("padding").get<int>()};
      s = kind == nn::LayerKind::conv2d ? nn::conv2d(g, act) : nn::conv_transpose2d(g, act);
    }
    nn::LayerParams<double> p{matrix_from(l.at("weight")), vector_from(l.at("bias"))};
    if (p.weight.rows() != s.weight_rows() || p.weight.cols() != s.weight_cols() ||
        p.bias.size() != s.bias_size())
      throw ParseError("layer parameters do not match the layer geometry");
    net.spec.push_back(s);
    net.layers.push_back(std::move(p));
  }
  try {
    nn::validate_spec(net.spec);
  } catch (const ConfigError& e) {
    throw ParseError(std::string("invalid network: ") + e.what());
  }
  return net;
}

json normalizer_json(const Normalizer& n) {
  return {{"mean", vector_json(n.mean)}, {"scale", vector_json(n.scale)}};
}

Normalizer normalizer_from(const json& j) {
  return {vector_from(j.at("mean")), vector_from(j.at("scale"))};
}

json train_config_json(const TrainConfig& c) {
  return {{"beta", c.beta},
          {"batch_size", c.batch_size},
          {"iterations", c.iterations},
          {"z_dim", c.z_dim},
          {"hidden", c.hidden},
          {"optimizer", c.optimizer.kind == nn::OptimizerKind::adam ? "adam" : "sgd"},
          {"learning_rate", c.optimizer.learning_rate},
          {"beta1", c.optimizer.beta1},
          {"beta2", c.optimizer.beta2},
          {"epsilon", c.optimizer.epsilon},
          {"convergence_window", c.convergence_window},
          {"convergence_tol", c.convergence_tol},
          {"jitter", c.jitter},
          {"smooth_images", c.smooth_images},
          {"seed", c.seed}};
}

TrainConfig train_config_from(const json& j) {
  TrainConfig c;
  c.beta = j.at("beta").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.iterations = j.at("iterations").get<int>();
  c.z_dim = j.at("z_dim").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.optimizer.kind =
      j.at("optimizer").get<std::string>() == "sgd" ? nn::OptimizerKind::sgd : nn::OptimizerKind::adam;
  c.optimizer.learning_rate = j.at("learning_rate").get<double>();
  c.optimizer.beta1 = j.at("beta1").get<double>();
  c.optimizer.beta2 = j.at("beta2").get<double>();
  c.optimizer.epsilon = j.at("epsilon").get<double>();
  c.convergence_window = j.at("convergence_window").get<int>();
  c.convergence_tol = j.at("convergence_tol").get<double>();
  c.jitter = j.at("jitter").get<double>();
  c.smooth_images = j.at("smooth_images").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

json ctes_json(const CtesModel& m) {
  const auto& g = m.generator;
  const auto& d = m.discriminator;
  json losses = json::array();
  for (const auto& l : m.losses) losses.push_back({l.d_loss, l.g_loss});
  return {{"generator",
           {{"z_dim", g.z_dim},
            {"image", {g.image.height, g.image.width}},
            {"x_norm", normalizer_json(g.x_norm)},
            {"y_norm", normalizer_json(g.y_norm)},
            {"h1", network_json(g.h1)},
            {"decoder", network_json(g.decoder)}}},
          {"discriminator",
           {{"x_norm", normalizer_json(d.x_norm)},
            {"y_norm", normalizer_json(d.y_norm)},
            {"encoder", network_json(d.encoder)},
            {"head", network_json(d.head)}}},
          {"config", train_config_json(m.config)},
          {"losses", losses},
          {"converged", m.converged}};
}

CtesModel ctes_from(const json& j) {
  CtesModel m;
  const auto& g = j.at("generator");
  m.generator.z_dim = g.at("z_dim").get<int>();
  const auto image = g.at("image").get<std::vector<int>>();
  if (image.size() != 2) throw ParseError("generator.image must hold two integers");
  m.generator.image = {image[0], image[1]};
  m.generator.x_norm = normalizer_from(g.at("x_norm"));
  m.generator.y_norm = normalizer_from(g.at("y_norm"));
  m.generator.h1 = network_from(g.at("h1"));
  m.generator.decoder = network_from(g.at("decoder"));
  const auto& d = j.at("discriminator");
  m.discriminator.x_norm = normalizer_from(d.at("x_norm"));
  m.discriminator.y_norm = normalizer_from(d.at("y_norm"));
  m.discriminator.encoder = network_from(d.at("encoder"));
  m.discriminator.head = network_from(d.at("head"));
  m.config = train_config_from(j.at("config"));
  for (const auto& l : j.at("losses")) m.losses.push_back({l.at(0).get<double>(), l.at(1).get<double>()});
  m.converged = j.at("converged").get<bool>();
  if (m.generator.h1.input_size() != m.generator.z_dim + m.generator.char_dim() ||
      m.generator.decoder.output_size() != m.generator.expr_dim())
    throw ParseError("generator networks do not match the stored dimensions");
  return m;
}

json ensemble_json(const EnsembleModel& e) {
  json members = json::array();
  for (const auto& m : e.models) members.push_back(m ? ctes_json(*m) : json(nullptr));
  const auto& cl = e.config.classifier;
  return {{"k", e.config.k},
          {"h", e.config.h},
          {"seed", e.config.seed},
          {"member_config", train_config_json(e.config.member)},
          {"classifier",
           {{"kind", cl.kind == ClassifierKind::forest ? "forest" : "cnn"},
            {"trees", cl.forest.trees},
            {"max_depth", cl.forest.max_depth},
            {"min_samples_split", cl.forest.min_samples_split},
            {"max_features", cl.forest.max_features},
            {"bootstrap", cl.forest.bootstrap},
            {"cnn_epochs", cl.cnn.epochs},
            {"cnn_batch_size", cl.cnn.batch_size},
            {"cnn_learning_rate", cl.cnn.learning_rate},
            {"image", {cl.image.height, cl.image.width}}}},
          {"members", members},
          {"scores", e.scores},
          {"selected", e.selected},
          {"diagnostics", e.diagnostics}};
}

EnsembleModel ensemble_from(const json& j) {
  EnsembleModel e;
  e.config.k = j.at("k").get<int>();
  e.config.h = j.at("h").get<int>();
  e.config.seed = j.at("seed").get<std::uint64_t>();
  e.config.member = train_config_from(j.at("member_config"));
  const auto& cl = j.at("classifier");
  auto& spec = e.config.classifier;
  spec.kind = cl.at("kind").get<std::string>() == "cnn" ? ClassifierKind::cnn : ClassifierKind::forest;
  spec.forest.trees = cl.at("trees").get<int>();
  spec.forest.max_depth = cl.at("max_depth").get<int>();
  spec.forest.min_samples_split = cl.at("min_samples_split").get<int>();
  spec.forest.max_features = cl.at("max_features").get<int>();
  spec.forest.bootstrap = cl.at("bootstrap").get<bool>();
  spec.cnn.epochs = cl.at("cnn_epochs").get<int>();
  spec.cnn.batch_size = cl.at("cnn_batch_size").get<int>();
  spec.cnn.learning_rate = cl.at("cnn_learning_rate").get<double>();
  const auto image = cl.at("image").get<std::vector<int>>();
  if (image.size() != 2) throw ParseError("classifier.image must hold two integers");
  spec.image = {image[0], image[1]};
  for (const auto& m : j.at("members"))
    e.models.push_back(m.is_null() ? std::nullopt : std::optional<CtesModel>(ctes_from(m)));
  e.scores = j.at("scores").get<std::vector<double>>();
  e.selected = j.at("selected").get<std::vector<int>>();
  e.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
  if (e.models.size() != e.scores.size() || int(e.models.size()) != e.config.k)
    throw ParseError("ensemble member and score counts disagree with k");
  for (int s : e.selected)
    if (s < 0 || s >= e.config.k || !e.models[std::size_t(s)])
      throw ParseError("ensemble selection refers to a missing member");
  return e;
}

}  // namespace

json model_to_json(const FittedModel& fitted) {
  json j = {{"format", "ctes-model"},
            {"version", kModelFormatVersion},
            {"method", to_string(fitted.method)},
            {"seed", fitted.seed}};
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, PlsModel>) {
          j["pls"] = {{"components", m.components},
                      {"x_weights", matrix_json(m.x_weights)},
                      {"x_loadings", matrix_json(m.x_loadings)},
                      {"y_loadings", matrix_json(m.y_loadings)},
                      {"x_scores", matrix_json(m.x_scores)},
                      {"x_mean", vector_json(m.x_mean.transpose())},
                      {"y_mean", vector_json(m.y_mean.transpose())},
                      {"coefficients", matrix_json(m.coefficients)}};
        } else if constexpr (std::is_same_v<T, GrnnModel>) {
          j["grnn"] = {{"inputs", matrix_json(m.inputs)},
                       {"targets", matrix_json(m.targets)},
                       {"bandwidth", m.bandwidth}};
        } else if constexpr (std::is_same_v<T, CtesModel>) {
          j["ctes"] = ctes_json(m);
        } else {
          j["ensemble"] = ensemble_json(m);
        }
      },
      fitted.model);
  return j;
}

FittedModel model_from_json(const json& j) {
  try {
    if (j.value("format", std::string()) != "ctes-model")
      throw ParseError("not a model file (missing format tag)");
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion)
      throw VersionMismatch("model file version " + std::to_string(version) +
                            " is not supported (expected " + std::to_string(kModelFormatVersion) +
                            ")");
    FittedModel out;
    try {
      out.method = parse_method(j.at("method").get<std::string>());
    } catch (const ConfigError& e) {
      throw ParseError(e.what());
    }
    out.seed = j.at("seed").get<std::uint64_t>();
    switch (out.method) {
      case MethodKind::pls: {
        const auto& p = j.at("pls");
        PlsModel m;
        m.components = p.at("components").get<int>();
        m.x_weights = matrix_from(p.at("x_weights"));
        m.x_loadings = matrix_from(p.at("x_loadings"));
        m.y_loadings = matrix_from(p.at("y_loadings"));
        m.x_scores = matrix_from(p.at("x_scores"));
        m.x_mean = vector_from(p.at("x_mean")).transpose();
        m.y_mean = vector_from(p.at("y_mean")).transpose();
        m.coefficients = matrix_from(p.at("coefficients"));
        out.model = std::move(m);
        break;
      }
      case MethodKind::grnn: {
        const auto& g = j.at("grnn");
        out.model = GrnnModel{matrix_from(g.at("inputs")), matrix_from(g.at("targets")),
                              g.at("bandwidth").get<double>()};
        break;
      }
      case MethodKind::se_ctes:
        out.model = ensemble_from(j.at("ensemble"));
        break;
      default:
        out.model = ctes_from(j.at("ctes"));
    }
    return out;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const FittedModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << model_to_json(model).dump() << '\n';
  if (!out) throw InputError("failed writing " + path);
}

FittedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what(), e.byte);
  }
  return model_from_json(j);
}

}  // namespace ctes
