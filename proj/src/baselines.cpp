#include "ctes/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ctes/errors.hpp"

namespace ctes {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

PlsModel pls_fit(const MatrixXd& x, const MatrixXd& y, int components) {
  if (x.rows() != y.rows()) throw InputError("pls_fit: X and Y are not row-aligned");
  if (x.rows() < 2) throw InputError("pls_fit: need at least 2 samples");
  if (components < 1) throw ConfigError("pls_fit: components must be >= 1");
  const Index max_components = std::min<Index>(x.rows() - 1, x.cols());
  if (components > max_components)
    throw ConfigError("pls_fit: components must be <= min(N-1, m) = " +
                      std::to_string(max_components));

  PlsModel model;
  model.x_mean = x.colwise().mean();
  model.y_mean = y.colwise().mean();
  MatrixXd e = x.rowwise() - model.x_mean;
  MatrixXd f = y.rowwise() - model.y_mean;
  if (e.squaredNorm() == 0.0) throw InputError("pls_fit: X has zero variance");

  const Index m = x.cols(), n = y.cols();
  std::vector<VectorXd> ws, ps, qs, ts;
  const double scale = e.squaredNorm();
  for (int a = 0; a < components; ++a) {
    if (e.squaredNorm() <= 1e-24 * scale || f.squaredNorm() == 0.0) break;
    Index start = 0;
    f.colwise().squaredNorm().maxCoeff(&start);
    VectorXd u = f.col(start);
    VectorXd t = VectorXd::Zero(x.rows());
    VectorXd w(m), q(n);
    for (int iter = 0; iter < 500; ++iter) {
      w = e.transpose() * u;
      const double wn = w.norm();
      if (wn == 0.0) break;
      w /= wn;
      const VectorXd t_new = e * w;
      q = f.transpose() * t_new / t_new.squaredNorm();
      u = f * q / q.squaredNorm();
      const double change = (t_new - t).norm();
      t = t_new;
      if (change <= 1e-14 * t.norm()) break;
    }
    if (t.squaredNorm() == 0.0) break;
    const VectorXd p = e.transpose() * t / t.squaredNorm();
    q = f.transpose() * t / t.squaredNorm();
    e -= t * p.transpose();
    f -= t * q.transpose();
    ws.push_back(w);
    ps.push_back(p);
    qs.push_back(q);
    ts.push_back(t);
  }

  const Index a = Index(ws.size());
  model.components = int(a);
  model.x_weights.resize(m, a);
  model.x_loadings.resize(m, a);
  model.y_loadings.resize(n, a);
  model.x_scores.resize(x.rows(), a);
  for (Index j = 0; j < a; ++j) {
    model.x_weights.col(j) = ws[std::size_t(j)];
    model.x_loadings.col(j) = ps[std::size_t(j)];
    model.y_loadings.col(j) = qs[std::size_t(j)];
    model.x_scores.col(j) = ts[std::size_t(j)];
  }
  if (a == 0) {
    model.coefficients = MatrixXd::Zero(m, n);
  } else {
    const MatrixXd ptw = model.x_loadings.transpose() * model.x_weights;
    model.coefficients =
        model.x_weights * ptw.partialPivLu().solve(model.y_loadings.transpose());
  }
  return model;
}

MatrixXd pls_predict(const PlsModel& model, const MatrixXd& x) {
  if (x.cols() != model.x_mean.size())
    throw InputError("pls_predict: expected " + std::to_string(model.x_mean.size()) +
                     " characteristics");
  MatrixXd out = (x.rowwise() - model.x_mean) * model.coefficients;
  out.rowwise() += model.y_mean;
  return out;
}

double median_pairwise_distance(const MatrixXd& x) {
  std::vector<double> d;
  d.reserve(std::size_t(x.rows() * (x.rows() - 1) / 2));
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = i + 1; j < x.rows(); ++j) d.push_back((x.row(i) - x.row(j)).norm());
  if (d.empty()) return 1.0;
  const auto mid = d.begin() + std::ptrdiff_t(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  if (d.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(d.begin(), mid);
  return 0.5 * (lower + upper);
}

GrnnModel grnn_fit(const MatrixXd& x, const MatrixXd& y, std::optional<double> bandwidth) {
  if (x.rows() != y.rows()) throw InputError("grnn_fit: X and Y are not row-aligned");
  if (x.rows() < 1) throw InputError("grnn_fit: need at least one training pair");
  GrnnModel model{x, y, bandwidth.value_or(0.0)};
  if (!bandwidth) {
    model.bandwidth = median_pairwise_distance(x);
    if (!(model.bandwidth > 0.0)) model.bandwidth = 1.0;
  }
  if (!(model.bandwidth > 0.0)) throw ConfigError("grnn: bandwidth must be > 0");
  return model;
}

MatrixXd grnn_predict(const GrnnModel& model, const MatrixXd& x) {
  if (!(model.bandwidth > 0.0)) throw ConfigError("grnn: bandwidth must be > 0");
  if (x.cols() != model.inputs.cols())
    throw InputError("grnn_predict: expected " + std::to_string(model.inputs.cols()) +
                     " characteristics");
  const double denom = 2.0 * model.bandwidth * model.bandwidth;
  MatrixXd out(x.rows(), model.targets.cols());
  VectorXd sq(model.inputs.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    sq = (model.inputs.rowwise() - x.row(i)).rowwise().squaredNorm();
    // relative to the nearest point; Eigen's packet exp floors at a denormal
    const double nearest = sq.minCoeff();
    const VectorXd w = sq.unaryExpr([&](double d) { return std::exp(-(d - nearest) / denom); });
    const double total = w.sum();
    if (total > 0.0 && std::isfinite(total)) {
      out.row(i) = (w.transpose() * model.targets) / total;
    } else {
      Index nearest = 0;
      sq.minCoeff(&nearest);
      out.row(i) = model.targets.row(nearest);
    }
  }
  return out;
}

std::string to_string(MethodKind kind) {
  switch (kind) {
    case MethodKind::pls: return "pls";
    case MethodKind::grnn: return "grnn";
    case MethodKind::cgan: return "cgan";
    case MethodKind::gan_cls: return "gan-cls";
    case MethodKind::ctes: return "ctes";
    case MethodKind::se_ctes: return "se-ctes";
  }
  return "?";
}

MethodKind parse_method(const std::string& name) {
  for (auto k : {MethodKind::pls, MethodKind::grnn, MethodKind::cgan, MethodKind::gan_cls,
                 MethodKind::ctes, MethodKind::se_ctes})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown method '" + name +
                    "' (expected pls, grnn, cgan, gan-cls, ctes or se-ctes)");
}

bool is_gan(MethodKind kind) {
  return kind == MethodKind::cgan || kind == MethodKind::gan_cls || kind == MethodKind::ctes ||
         kind == MethodKind::se_ctes;
}

VariantSettings variant_config(const std::string& name) {
  const MethodKind kind = parse_method(name);
  switch (kind) {
    case MethodKind::cgan: return {kind, 1.0, false, 1, 1};
    case MethodKind::gan_cls: return {kind, 0.5, false, 1, 1};
    case MethodKind::ctes: return {kind, 0.9, false, 1, 1};
    case MethodKind::se_ctes: return {kind, 0.9, true, 5, 2};
    default: throw ConfigError("'" + name + "' is not an adversarial variant");
  }
}

}  // namespace ctes
