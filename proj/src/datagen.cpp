#include "ctes/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ctes/errors.hpp"
#include "ctes/log.hpp"

namespace ctes {

void SimConfig::validate() const {
  if (!(sigma > 0.0 && sigma < 1.0)) throw ConfigError("sim.sigma must lie in (0, 1)");
  if (samples_per_group < 1) throw ConfigError("sim.samples_per_group must be >= 1");
  if (groups < 1) throw ConfigError("sim.groups must be >= 1");
  if (noise_std < 0.0) throw ConfigError("sim.noise_std must be >= 0");
}

Expression6 expression_transform(double x1, double x2, const std::array<double, 6>& eps) {
  Expression6 y;
  double scale = 1.0;  // 2^k / k!
  for (int k = 0; k < 3; ++k) {
    const double a = x1 + eps[k], b = x2 + eps[k];
    y[k] = scale * std::pow(a * b, k) * std::exp(-a * a - b * b);
    scale *= 2.0 / double(k + 1);
  }
  y[3] = (x1 + eps[3]) * (x1 + eps[3]);
  y[4] = (x2 + eps[4]) * (x2 + eps[4]);
  y[5] = (x1 + eps[5]) * (x2 + eps[5]);
  return y;
}

PairedDataset gen_multivariate_dataset(const SimConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  const Index n = Index(cfg.groups) * cfg.samples_per_group;
  PairedDataset d;
  d.characteristics.resize(n, 2);
  d.expressions.resize(n, 6);
  d.groups.resize(n);
  d.num_groups = cfg.groups;
  Index row = 0;
  for (int g = 1; g <= cfg.groups; ++g) {
    const double mu = 0.2 * g;
    for (int j = 0; j < cfg.samples_per_group; ++j, ++row) {
      const double x1 = mu + cfg.sigma * unit(rng);
      const double x2 = mu + cfg.sigma * unit(rng);
      std::array<double, 6> eps{};
      if (cfg.shared_noise) {
        eps.fill(cfg.noise_std * unit(rng));
      } else {
        for (auto& e : eps) e = cfg.noise_std * unit(rng);
      }
      d.characteristics(row, 0) = x1;
      d.characteristics(row, 1) = x2;
      d.expressions.row(row) = expression_transform(x1, x2, eps).transpose();
      d.groups[row] = g;
    }
  }
  return d;
}

// ---------------------------------------------------------------------------

double GpSimConfig::length_scale(int category) const {
  if (length_scales.empty()) return double(category);
  return length_scales.at(std::size_t(category - 1));
}

void GpSimConfig::validate() const {
  if (side < 2) throw ConfigError("gp.side must be >= 2");
  if (images_per_category < 1) throw ConfigError("gp.images_per_category must be >= 1");
  if (categories < 1) throw ConfigError("gp.categories must be >= 1");
  if (char_dim < 1) throw ConfigError("gp.char_dim must be >= 1");
  if (!length_scales.empty() && int(length_scales.size()) != categories)
    throw ConfigError("gp.length_scales must list one value per category");
  for (double l : length_scales)
    if (!(l > 0.0)) throw ConfigError("gp.length_scales must be positive");
}

namespace {

MatrixXd rbf_1d(int size, double length_scale) {
  MatrixXd k(size, size);
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j) {
      const double d = double(i - j);
      k(i, j) = std::exp(-d * d / (2.0 * length_scale));
    }
  return k;
}

MatrixXd cholesky_factor(MatrixXd k, double jitter) {
  k.diagonal().array() += jitter;
  Eigen::LLT<MatrixXd> llt(k);
  if (llt.info() != Eigen::Success)
    throw SamplingError("kernel matrix is not positive definite after jitter");
  return llt.matrixL();
}

}  // namespace

GpSampler::GpSampler(int height, int width, double length_scale, double jitter) {
  if (height < 1 || width < 1 || !(length_scale > 0.0))
    throw ConfigError("GpSampler: grid sides and length scale must be positive");
  row_factor_ = cholesky_factor(rbf_1d(height, length_scale), jitter);
  col_factor_ = cholesky_factor(rbf_1d(width, length_scale), jitter);
}

MatrixXd GpSampler::sample(Rng& rng) const {
  std::normal_distribution<double> unit(0.0, 1.0);
  MatrixXd z(row_factor_.rows(), col_factor_.rows());
  for (Index j = 0; j < z.cols(); ++j)
    for (Index i = 0; i < z.rows(); ++i) z(i, j) = unit(rng);
  return row_factor_ * z * col_factor_.transpose();
}

MatrixXd GpSampler::dense_kernel(int height, int width, double length_scale) {
  const int n = height * width;
  MatrixXd k(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const double dr = double(a / width - b / width);
      const double dc = double(a % width - b % width);
      k(a, b) = std::exp(-(dr * dr + dc * dc) / (2.0 * length_scale));
    }
  return k;
}

MatrixXd gp_sample(const GpSimConfig& cfg, int category, Rng& rng) {
  cfg.validate();
  if (category < 1 || category > cfg.categories)
    throw InputError("gp_sample: category out of range");
  GpSampler sampler(cfg.side, cfg.side, cfg.length_scale(category), cfg.jitter);
  return sampler.sample(rng);
}

PairedDataset gen_scalar_to_matrix_dataset(const GpSimConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  const Index n = Index(cfg.categories) * cfg.images_per_category;
  PairedDataset d;
  d.characteristics.resize(n, cfg.char_dim);
  d.expressions.resize(n, Index(cfg.side) * cfg.side);
  d.groups.resize(n);
  d.num_groups = cfg.categories;
  d.image = {cfg.side, cfg.side};
  Index row = 0;
  for (int i = 1; i <= cfg.categories; ++i) {
    const double l = cfg.length_scale(i);
    GpSampler sampler(cfg.side, cfg.side, l, cfg.jitter);
    for (int j = 0; j < cfg.images_per_category; ++j, ++row) {
      const MatrixXd field = sampler.sample(rng);
      for (int r = 0; r < cfg.side; ++r)
        for (int c = 0; c < cfg.side; ++c) d.expressions(row, r * cfg.side + c) = field(r, c);
      for (int q = 1; q <= cfg.char_dim; ++q)
        d.characteristics(row, q - 1) = 20.0 * l + q / 10.0 + unit(rng);
      d.groups[row] = i;
    }
  }
  return d;
}

// ---------------------------------------------------------------------------

Discretized quantile_discretize(std::span<const double> column, int bins) {
  if (column.empty()) throw InputError("quantile_discretize: empty column");
  if (bins < 2) throw ConfigError("quantile_discretize: bins must be >= 2");
  std::vector<double> sorted(column.begin(), column.end());
  std::sort(sorted.begin(), sorted.end());
  const double last = double(sorted.size() - 1);
  std::vector<double> edges(static_cast<std::size_t>(bins - 1));
  for (int j = 1; j < bins; ++j) {
    const double pos = last * double(j) / double(bins);
    const auto lo = std::size_t(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - double(lo);
    edges[std::size_t(j - 1)] = sorted[lo] + frac * (sorted[hi] - sorted[lo]);
  }
  Discretized out;
  out.bins.resize(Index(column.size()));
  for (std::size_t i = 0; i < column.size(); ++i) {
    // count of edges strictly below the value
    out.bins[Index(i)] = int(std::lower_bound(edges.begin(), edges.end(), column[i]) - edges.begin());
  }
  const auto distinct = std::size_t(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
  if (distinct < std::size_t(bins)) {
    out.degenerate = true;
    logger()->warn("quantile_discretize: {} distinct values for {} bins; some bins are empty",
                   distinct, bins);
  }
  return out;
}

MatrixXd low_pass_filter(const MatrixXd& image) {
  const Index h = image.rows(), w = image.cols();
  MatrixXd out(h, w);
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c) {
      double sum = 0.0;
      for (Index dr = -1; dr <= 1; ++dr)
        for (Index dc = -1; dc <= 1; ++dc)
          sum += image(std::clamp<Index>(r + dr, 0, h - 1), std::clamp<Index>(c + dc, 0, w - 1));
      out(r, c) = sum / 9.0;
    }
  return out;
}

MatrixXd low_pass_filter_rows(const MatrixXd& rows, ImageShape shape) {
  if (shape.empty() || rows.cols() != shape.pixels())
    throw InputError("low_pass_filter_rows: row width does not match image shape");
  using RowImage = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  MatrixXd out(rows.rows(), rows.cols());
  for (Index i = 0; i < rows.rows(); ++i) {
    const RowImage img = Eigen::Map<const RowImage>(VectorXd(rows.row(i).transpose()).data(),
                                                    shape.height, shape.width);
    const RowImage filtered = low_pass_filter(img);
    out.row(i) = Eigen::Map<const Eigen::RowVectorXd>(filtered.data(), filtered.size());
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(const PairedDataset& data, const std::string& path) {
  data.validate();
  std::ofstream out(path);
  if (!out) throw InputError("cannot open " + path + " for writing");
  std::vector<std::string> header;
  for (Index j = 0; j < data.char_dim(); ++j) header.push_back("x" + std::to_string(j + 1));
  if (data.image.empty()) {
    for (Index j = 0; j < data.expr_dim(); ++j) header.push_back("y" + std::to_string(j + 1));
  } else {
    for (int r = 0; r < data.image.height; ++r)
      for (int c = 0; c < data.image.width; ++c)
        header.push_back("px_" + std::to_string(r) + "_" + std::to_string(c));
  }
  header.push_back("group");
  if (data.outcome) header.push_back("outcome");
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  for (Index i = 0; i < data.size(); ++i) {
    for (Index j = 0; j < data.char_dim(); ++j)
      out << (j ? "," : "") << format_double(data.characteristics(i, j));
    for (Index j = 0; j < data.expr_dim(); ++j)
      out << (data.char_dim() + j ? "," : "") << format_double(data.expressions(i, j));
    out << ',' << data.groups[i];
    if (data.outcome) out << ',' << (*data.outcome)[i];
    out << '\n';
  }
}

namespace {

enum class Column { characteristic, expression, pixel, group, outcome };

bool parse_index_suffix(const std::string& s, std::size_t from, int& value) {
  if (from >= s.size()) return false;
  for (std::size_t i = from; i < s.size(); ++i)
    if (s[i] < '0' || s[i] > '9') return false;
  value = std::stoi(s.substr(from));
  return true;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    out.push_back(cell);
  }
  return out;
}

}  // namespace

PairedDataset read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": missing header row", 0);
  const auto header = split_line(line);
  std::vector<Column> kinds;
  int m = 0, n = 0, max_r = -1, max_c = -1;
  bool has_group = false, has_outcome = false;
  for (const auto& h : header) {
    int idx = 0;
    if (h == "group") {
      kinds.push_back(Column::group);
      has_group = true;
    } else if (h == "outcome") {
      kinds.push_back(Column::outcome);
      has_outcome = true;
    } else if (h.size() > 1 && h[0] == 'x' && parse_index_suffix(h, 1, idx)) {
      kinds.push_back(Column::characteristic);
      ++m;
    } else if (h.size() > 1 && h[0] == 'y' && parse_index_suffix(h, 1, idx)) {
      kinds.push_back(Column::expression);
      ++n;
    } else if (h.rfind("px_", 0) == 0) {
      const auto sep = h.find('_', 3);
      int r = 0, c = 0;
      if (sep == std::string::npos || !parse_index_suffix(h.substr(0, sep), 3, r) ||
          !parse_index_suffix(h, sep + 1, c))
        throw ParseError(path + ": malformed pixel column '" + h + "'", 0);
      kinds.push_back(Column::pixel);
      max_r = std::max(max_r, r);
      max_c = std::max(max_c, c);
      ++n;
    } else {
      throw ParseError(path + ": unknown column '" + h + "'", 0);
    }
  }
  if (!has_group) throw ParseError(path + ": missing 'group' column", 0);
  if (m == 0 || n == 0) throw ParseError(path + ": need at least one x and one y column", 0);

  std::vector<std::vector<double>> xs, ys;
  std::vector<int> gs, os;
  std::size_t offset = line.size() + 1;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") {
      offset += line.size() + 1;
      continue;
    }
    const auto cells = split_line(line);
    if (cells.size() != header.size())
      throw ParseError(path + ": line " + std::to_string(line_no) + " has " +
                           std::to_string(cells.size()) + " fields, expected " +
                           std::to_string(header.size()),
                       offset);
    std::vector<double> x, y;
    int g = 0, o = 0;
    for (std::size_t j = 0; j < cells.size(); ++j) {
      char* end = nullptr;
      const double v = std::strtod(cells[j].c_str(), &end);
      if (cells[j].empty() || end != cells[j].c_str() + cells[j].size())
        throw ParseError(path + ": line " + std::to_string(line_no) + ": bad number '" +
                             cells[j] + "'",
                         offset);
      switch (kinds[j]) {
        case Column::characteristic: x.push_back(v); break;
        case Column::expression:
        case Column::pixel: y.push_back(v); break;
        case Column::group: g = int(v); break;
        case Column::outcome: o = int(v); break;
      }
    }
    xs.push_back(std::move(x));
    ys.push_back(std::move(y));
    gs.push_back(g);
    os.push_back(o);
    offset += line.size() + 1;
  }

  PairedDataset d;
  const Index rows = Index(xs.size());
  d.characteristics.resize(rows, m);
  d.expressions.resize(rows, n);
  d.groups.resize(rows);
  for (Index i = 0; i < rows; ++i) {
    d.characteristics.row(i) = Eigen::Map<const Eigen::RowVectorXd>(xs[i].data(), m);
    d.expressions.row(i) = Eigen::Map<const Eigen::RowVectorXd>(ys[i].data(), n);
    d.groups[i] = gs[std::size_t(i)];
  }
  d.num_groups = rows ? d.groups.maxCoeff() : 0;
  if (has_outcome) d.outcome = Eigen::Map<const VectorXi>(os.data(), rows);
  if (max_r >= 0) {
    d.image = {max_r + 1, max_c + 1};
  }
  d.validate();
  return d;
}

}  // namespace ctes

namespace ctes {

MatrixXd discretize_continuous_columns(const MatrixXd& data, int bins) {
  MatrixXd out = data;
  for (Index j = 0; j < data.cols(); ++j) {
    std::vector<double> col(data.col(j).data(), data.col(j).data() + data.rows());
    std::sort(col.begin(), col.end());
    if (std::unique(col.begin(), col.end()) - col.begin() <= bins) continue;
    const VectorXd c = data.col(j);
    out.col(j) = quantile_discretize({c.data(), std::size_t(c.size())}, bins).bins.cast<double>();
  }
  return out;
}

}  // namespace ctes
