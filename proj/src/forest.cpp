#include "ctes/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ctes/errors.hpp"
#include "ctes/random.hpp"

namespace ctes {

void ForestConfig::validate() const {
  if (trees < 1) throw ConfigError("forest.trees must be >= 1");
  if (min_samples_split < 2) throw ConfigError("forest.min_samples_split must be >= 2");
  if (max_depth < 0) throw ConfigError("forest.max_depth must be >= 0");
  if (max_features < 0) throw ConfigError("forest.max_features must be >= 0");
}

double gini(std::span<const int> counts) {
  long total = 0;
  for (int c : counts) {
    if (c < 0) throw InputError("gini: negative class count");
    total += c;
  }
  if (total == 0) throw InputError("gini: class counts sum to zero");
  double sq = 0.0;
  for (int c : counts) {
    const double p = double(c) / double(total);
    sq += p * p;
  }
  return 1.0 - sq;
}

namespace {

struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  double score = -1.0;  // sum over children of sum_c n_c^2 / n_child; larger is purer
};

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& x, const std::vector<int>& y, int classes,
              const ForestConfig& cfg, Rng& rng)
      : x_(x), y_(y), classes_(classes), cfg_(cfg), rng_(rng) {
    const int d = int(x.cols());
    mtry_ = cfg.max_features > 0 ? std::min(cfg.max_features, d)
                                 : std::max(1, int(std::floor(std::sqrt(double(d)))));
    features_.resize(std::size_t(d));
    std::iota(features_.begin(), features_.end(), 0);
  }

  Tree build(std::vector<Eigen::Index> rows) {
    Tree tree;
    struct Pending {
      int node;
      std::size_t begin, end;
      int depth;
    };
    rows_ = std::move(rows);
    tree.nodes.emplace_back();
    std::vector<Pending> stack{{0, 0, rows_.size(), 0}};
    while (!stack.empty()) {
      const Pending p = stack.back();
      stack.pop_back();
      TreeNode& node = tree.nodes[std::size_t(p.node)];
      node.counts.assign(std::size_t(classes_), 0);
      for (std::size_t i = p.begin; i < p.end; ++i) ++node.counts[std::size_t(y_[std::size_t(rows_[i])])];
      const std::size_t n = p.end - p.begin;
      const bool pure =
          std::count_if(node.counts.begin(), node.counts.end(), [](int c) { return c > 0; }) <= 1;
      if (pure || n < std::size_t(cfg_.min_samples_split) ||
          (cfg_.max_depth > 0 && p.depth >= cfg_.max_depth))
        continue;
      const SplitCandidate best = find_split(p.begin, p.end);
      if (best.feature < 0) continue;
      const auto mid = std::partition(rows_.begin() + std::ptrdiff_t(p.begin),
                                      rows_.begin() + std::ptrdiff_t(p.end), [&](Eigen::Index r) {
                                        return x_(r, best.feature) <= best.threshold;
                                      });
      const std::size_t split = std::size_t(mid - rows_.begin());
      const int left = int(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      TreeNode& parent = tree.nodes[std::size_t(p.node)];  // re-fetch after growth
      parent.feature = best.feature;
      parent.threshold = best.threshold;
      parent.left = left;
      parent.right = left + 1;
      stack.push_back({left + 1, split, p.end, p.depth + 1});
      stack.push_back({left, p.begin, split, p.depth + 1});
    }
    return tree;
  }

 private:
  SplitCandidate find_split(std::size_t begin, std::size_t end) {
    std::shuffle(features_.begin(), features_.end(), rng_);
    SplitCandidate best;
    const std::size_t n = end - begin;
    std::vector<std::pair<double, int>> column(n);
    std::vector<double> left(static_cast<std::size_t>(classes_)), right(static_cast<std::size_t>(classes_));
    for (std::size_t k = 0; k < features_.size(); ++k) {
      if (int(k) >= mtry_ && best.feature >= 0) break;
      const int f = features_[k];
      for (std::size_t i = 0; i < n; ++i) {
        const auto r = rows_[begin + i];
        column[i] = {x_(r, f), y_[std::size_t(r)]};
      }
      std::sort(column.begin(), column.end());
      if (column.front().first == column.back().first) continue;
      std::fill(left.begin(), left.end(), 0.0);
      std::fill(right.begin(), right.end(), 0.0);
      for (const auto& [v, c] : column) right[std::size_t(c)] += 1.0;
      double left_sq = 0.0, right_sq = 0.0;
      for (double c : right) right_sq += c * c;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const auto c = std::size_t(column[i].second);
        left_sq += 2.0 * left[c] + 1.0;
        right_sq -= 2.0 * right[c] - 1.0;
        left[c] += 1.0;
        right[c] -= 1.0;
        const double a = column[i].first, b = column[i + 1].first;
        if (a == b) continue;
        const double nl = double(i + 1), nr = double(n - i - 1);
        const double score = left_sq / nl + right_sq / nr;
        if (score > best.score) {
          double t = a + (b - a) / 2.0;
          if (!(t < b)) t = a;
          best = {f, t, score};
        }
      }
    }
    return best;
  }

  const Eigen::MatrixXd& x_;
  const std::vector<int>& y_;
  int classes_;
  const ForestConfig& cfg_;
  Rng& rng_;
  int mtry_ = 1;
  std::vector<int> features_;
  std::vector<Eigen::Index> rows_;
};

int majority(const std::vector<int>& counts) {
  return int(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

}  // namespace

Forest fit_forest(const Eigen::MatrixXd& x, std::span<const int> labels, const ForestConfig& cfg) {
  cfg.validate();
  if (Eigen::Index(labels.size()) != x.rows())
    throw InputError("fit_forest: labels are not aligned with rows");
  if (x.rows() < 2) throw InputError("fit_forest: need at least 2 samples");
  if (!x.allFinite()) throw InputError("fit_forest: features must be finite");

  Forest forest;
  forest.dim = int(x.cols());
  forest.labels.assign(labels.begin(), labels.end());
  std::sort(forest.labels.begin(), forest.labels.end());
  forest.labels.erase(std::unique(forest.labels.begin(), forest.labels.end()), forest.labels.end());
  if (forest.labels.size() < 2) throw InputError("fit_forest: need at least 2 classes");
  const int classes = int(forest.labels.size());

  std::vector<int> y(labels.size());
  std::vector<std::vector<Eigen::Index>> by_class(static_cast<std::size_t>(classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    y[i] = int(std::lower_bound(forest.labels.begin(), forest.labels.end(), labels[i]) -
               forest.labels.begin());
    by_class[std::size_t(y[i])].push_back(Eigen::Index(i));
  }

  forest.trees.reserve(std::size_t(cfg.trees));
  for (int t = 0; t < cfg.trees; ++t) {
    Rng rng(derive_seed(cfg.seed, std::uint64_t(t)));
    std::vector<Eigen::Index> rows;
    rows.reserve(labels.size());
    if (cfg.bootstrap) {
      for (const auto& members : by_class) {
        std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
        for (std::size_t i = 0; i < members.size(); ++i) rows.push_back(members[pick(rng)]);
      }
    } else {
      for (std::size_t i = 0; i < labels.size(); ++i) rows.push_back(Eigen::Index(i));
    }
    TreeBuilder builder(x, y, classes, cfg, rng);
    forest.trees.push_back(builder.build(std::move(rows)));
  }
  return forest;
}

int tree_vote(const Tree& tree, const double* row, Eigen::Index stride) {
  int node = 0;
  while (!tree.nodes[std::size_t(node)].is_leaf()) {
    const auto& n = tree.nodes[std::size_t(node)];
    node = row[Eigen::Index(n.feature) * stride] <= n.threshold ? n.left : n.right;
  }
  return majority(tree.nodes[std::size_t(node)].counts);
}

namespace {

Eigen::MatrixXi vote_counts(const Forest& forest, const Eigen::MatrixXd& x) {
  if (x.cols() != forest.dim)
    throw InputError("predict_forest: expected " + std::to_string(forest.dim) +
                     " features, got " + std::to_string(x.cols()));
  Eigen::MatrixXi votes = Eigen::MatrixXi::Zero(x.rows(), Eigen::Index(forest.labels.size()));
  for (const auto& tree : forest.trees)
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      ++votes(i, tree_vote(tree, x.data() + i, x.rows()));
  return votes;
}

}  // namespace

Eigen::VectorXi predict_forest(const Forest& forest, const Eigen::MatrixXd& x) {
  const Eigen::MatrixXi votes = vote_counts(forest, x);
  Eigen::VectorXi out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::Index best = 0;
    votes.row(i).maxCoeff(&best);  // first maximum, i.e. lowest class
    out[i] = forest.labels[std::size_t(best)];
  }
  return out;
}

Eigen::MatrixXd vote_fractions(const Forest& forest, const Eigen::MatrixXd& x) {
  return vote_counts(forest, x).cast<double>() / double(forest.trees.size());
}

}  // namespace ctes
