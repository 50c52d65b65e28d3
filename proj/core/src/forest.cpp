#include "ipad/forest.hpp"
#include "ipad/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

namespace ipad {

ForestConfig default_forest_config(Eigen::Index n_columns, const SeedSpec& seed) {
  ForestConfig c;
  c.mtry = std::max<int>(static_cast<int>(n_columns / 3), 1);
  c.seed = seed;
  return c;
}

double RegressionTree::predict(const Matrix& a, Eigen::Index row) const {
  int k = 0;
  while (nodes_[static_cast<std::size_t>(k)].feature >= 0) {
    const Node& nd = nodes_[static_cast<std::size_t>(k)];
    k = a(row, nd.feature) <= nd.threshold ? nd.left : nd.right;
  }
  return nodes_[static_cast<std::size_t>(k)].value;
}

double RegressionTree::predict_swapped(const Matrix& a, Eigen::Index row, int permuted_feature,
                                       Eigen::Index donor_row) const {
  int k = 0;
  while (nodes_[static_cast<std::size_t>(k)].feature >= 0) {
    const Node& nd = nodes_[static_cast<std::size_t>(k)];
    const double v = nd.feature == permuted_feature ? a(donor_row, nd.feature) : a(row, nd.feature);
    k = v <= nd.threshold ? nd.left : nd.right;
  }
  return nodes_[static_cast<std::size_t>(k)].value;
}

bool RegressionTree::uses_feature(int feature) const {
  return std::any_of(nodes_.begin(), nodes_.end(), [&](const Node& nd) { return nd.feature == feature; });
}

ForestModel::ForestModel(std::vector<RegressionTree> trees, std::vector<std::vector<Eigen::Index>> oob,
                         Eigen::Index n_columns, ForestConfig config)
    : trees_(std::move(trees)), oob_(std::move(oob)), n_columns_(n_columns), config_(config) {}

double ForestModel::predict(const Matrix& a, Eigen::Index row) const {
  double s = 0.0;
  for (const auto& t : trees_) s += t.predict(a, row);
  return s / static_cast<double>(trees_.size());
}

Vector ForestModel::predict(const Matrix& a) const {
  if (a.cols() != n_columns_) throw ValidationError("forest: prediction matrix has wrong width");
  Vector out(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) out(i) = predict(a, i);
  return out;
}

Vector ForestModel::oob_predictions(const Matrix& a) const {
  Vector sum = Vector::Zero(a.rows());
  Eigen::VectorXi count = Eigen::VectorXi::Zero(a.rows());
  for (std::size_t t = 0; t < trees_.size(); ++t)
    for (Eigen::Index i : oob_[t]) {
      sum(i) += trees_[t].predict(a, i);
      ++count(i);
    }
  Vector out(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    out(i) = count(i) ? sum(i) / count(i) : std::numeric_limits<double>::quiet_NaN();
  return out;
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& a, const Vector& y, const ForestConfig& cfg, Engine& eng)
      : a_(a), y_(y), cfg_(cfg), eng_(eng), features_(static_cast<std::size_t>(a.cols())) {
    std::iota(features_.begin(), features_.end(), 0);
  }

  RegressionTree build(std::vector<Eigen::Index> sample) {
    idx_ = std::move(sample);
    nodes_.clear();
    nodes_.emplace_back();
    struct Task { int node; std::size_t begin, end; };
    std::vector<Task> stack{{0, 0, idx_.size()}};
    while (!stack.empty()) {
      const Task t = stack.back();
      stack.pop_back();
      double sum = 0.0;
      for (std::size_t i = t.begin; i < t.end; ++i) sum += y_(idx_[i]);
      const std::size_t size = t.end - t.begin;
      nodes_[static_cast<std::size_t>(t.node)].value = sum / static_cast<double>(size);

      int feature = -1;
      double threshold = 0.0;
      if (!find_split(t.begin, t.end, sum, feature, threshold)) continue;

      auto mid = std::partition(idx_.begin() + static_cast<std::ptrdiff_t>(t.begin),
                                idx_.begin() + static_cast<std::ptrdiff_t>(t.end),
                                [&](Eigen::Index i) { return a_(i, feature) <= threshold; });
      const std::size_t split = static_cast<std::size_t>(mid - idx_.begin());
      const int left = static_cast<int>(nodes_.size());
      nodes_.emplace_back();
      nodes_.emplace_back();
      auto& nd = nodes_[static_cast<std::size_t>(t.node)];
      nd.feature = feature;
      nd.threshold = threshold;
      nd.left = left;
      nd.right = left + 1;
      stack.push_back({left + 1, split, t.end});
      stack.push_back({left, t.begin, split});
    }
    return RegressionTree(std::move(nodes_));
  }

 private:
  bool find_split(std::size_t begin, std::size_t end, double sum, int& best_feature, double& best_threshold) {
    const std::size_t size = end - begin;
    const std::size_t min_leaf = static_cast<std::size_t>(cfg_.min_leaf);
    if (size < 2 * min_leaf) return false;

    // Partial Fisher-Yates draw of mtry candidate features.
    const std::size_t m = features_.size();
    const std::size_t tries = std::min<std::size_t>(static_cast<std::size_t>(cfg_.mtry), m);
    for (std::size_t k = 0; k < tries; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, m - 1);
      std::swap(features_[k], features_[pick(eng_)]);
    }

    const double parent = sum * sum / static_cast<double>(size);
    double best_gain = 1e-12 * std::max(1.0, std::abs(parent));
    bool found = false;
    pairs_.resize(size);
    for (std::size_t k = 0; k < tries; ++k) {
      const int f = features_[k];
      for (std::size_t i = 0; i < size; ++i) {
        const Eigen::Index r = idx_[begin + i];
        pairs_[i] = {a_(r, f), y_(r)};
      }
      std::sort(pairs_.begin(), pairs_.end(),
                [](const auto& l, const auto& r) { return l.first < r.first; });
      double left = 0.0;
      for (std::size_t i = 0; i + 1 < size; ++i) {
        left += pairs_[i].second;
        const std::size_t nl = i + 1;
        const std::size_t nr = size - nl;
        if (nl < min_leaf) continue;
        if (nr < min_leaf) break;
        if (!(pairs_[i].first < pairs_[i + 1].first)) continue;
        const double right = sum - left;
        const double gain = left * left / static_cast<double>(nl) + right * right / static_cast<double>(nr) - parent;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = f;
          double mid = 0.5 * (pairs_[i].first + pairs_[i + 1].first);
          if (!(mid < pairs_[i + 1].first)) mid = pairs_[i].first;
          best_threshold = mid;
          found = true;
        }
      }
    }
    return found;
  }

  const Matrix& a_;
  const Vector& y_;
  const ForestConfig& cfg_;
  Engine& eng_;
  std::vector<int> features_;
  std::vector<Eigen::Index> idx_;
  std::vector<RegressionTree::Node> nodes_;
  std::vector<std::pair<double, double>> pairs_;
};

}  // namespace

ForestModel fit_forest(const Matrix& a, const Vector& y, const ForestConfig& config) {
  const Eigen::Index n = a.rows();
  if (y.size() != n) throw ValidationError("fit_forest: response length does not match design");
  if (config.n_trees < 1) throw ValidationError("fit_forest: n_trees must be >= 1");
  if (config.min_leaf < 1) throw ValidationError("fit_forest: min_leaf must be >= 1");
  if (config.mtry < 1 || config.mtry > a.cols())
    throw ValidationError("fit_forest: mtry must lie in [1, number of columns]");
  if (n < 2 * static_cast<Eigen::Index>(config.min_leaf))
    throw ValidationError("fit_forest: need at least 2 * min_leaf rows");
  if (!a.allFinite() || !y.allFinite()) throw NumericalError("fit_forest: non-finite input");

  std::vector<std::optional<RegressionTree>> grown(static_cast<std::size_t>(config.n_trees));
  std::vector<std::vector<Eigen::Index>> oob(static_cast<std::size_t>(config.n_trees));
  parallel_for(grown.size(), config.threads, [&](std::size_t t) {
    Engine eng = make_engine(child(config.seed, static_cast<std::uint64_t>(t)));
    std::uniform_int_distribution<Eigen::Index> draw(0, n - 1);
    std::vector<Eigen::Index> sample(static_cast<std::size_t>(n));
    std::vector<char> in_bag(static_cast<std::size_t>(n), 0);
    for (auto& s : sample) {
      s = draw(eng);
      in_bag[static_cast<std::size_t>(s)] = 1;
    }
    for (Eigen::Index i = 0; i < n; ++i)
      if (!in_bag[static_cast<std::size_t>(i)]) oob[t].push_back(i);

    TreeBuilder builder(a, y, config, eng);
    grown[t] = builder.build(std::move(sample));
  });
  std::vector<RegressionTree> trees;
  trees.reserve(grown.size());
  for (auto& t : grown) trees.push_back(std::move(*t));
  return ForestModel(std::move(trees), std::move(oob), a.cols(), config);
}

MdaReport mda(const ForestModel& model, const Matrix& a, const Vector& y, const SeedSpec& seed) {
  if (a.cols() != model.n_columns()) throw ValidationError("mda: matrix width differs from the fitted model");
  if (y.size() != a.rows()) throw ValidationError("mda: response length does not match design");

  const Eigen::Index m = a.cols();
  MdaReport rep;
  rep.importance = Vector::Zero(m);
  int used_trees = 0;
  std::vector<Eigen::Index> donors;
  for (std::size_t t = 0; t < model.trees().size(); ++t) {
    const auto& rows = model.oob_rows()[t];
    if (rows.empty()) continue;
    ++used_trees;
    const auto& tree = model.trees()[t];
    const double k = static_cast<double>(rows.size());

    double base = 0.0;
    for (Eigen::Index i : rows) {
      const double e = y(i) - tree.predict(a, i);
      base += e * e;
    }
    base /= k;

    std::vector<char> used(static_cast<std::size_t>(m), 0);
    for (const auto& nd : tree.nodes())
      if (nd.feature >= 0) used[static_cast<std::size_t>(nd.feature)] = 1;

    Engine eng = make_engine(child(seed, t));
    for (Eigen::Index j = 0; j < m; ++j) {
      if (!used[static_cast<std::size_t>(j)]) continue;
      donors = rows;
      std::shuffle(donors.begin(), donors.end(), eng);
      double perm = 0.0;
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const double e = y(rows[r]) - tree.predict_swapped(a, rows[r], static_cast<int>(j), donors[r]);
        perm += e * e;
      }
      rep.importance(j) += perm / k - base;
    }
  }
  if (used_trees > 0) rep.importance /= static_cast<double>(used_trees);
  return rep;
}

}  // namespace ipad
