#include "chestprog/forest.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "chestprog/error.hpp"
#include "chestprog/parallel.hpp"

namespace chestprog::classify {

const TreeNode& DecisionTree::leaf(const Eigen::Ref<const Eigen::VectorXd>& row) const {
  std::size_t at = 0;
  while (nodes[at].feature >= 0) {
    at = static_cast<std::size_t>(row(nodes[at].feature) <= nodes[at].threshold ? nodes[at].left : nodes[at].right);
  }
  return nodes[at];
}

double ForestModel::probability(const Eigen::Ref<const Eigen::VectorXd>& row) const {
  if (trees.empty()) return 0.0;
  double votes = 0.0;
  for (const auto& t : trees) {
    const auto& l = t.leaf(row);
    if (proportion_vote) {
      votes += static_cast<double>(l.counts[1]) / static_cast<double>(l.counts[0] + l.counts[1]);
    } else {
      votes += l.counts[1] > l.counts[0] ? 1.0 : 0.0;
    }
  }
  return votes / static_cast<double>(trees.size());
}

namespace {

double gini_mass(int a, int b) {
  const int n = a + b;
  return n == 0 ? 0.0 : static_cast<double>(n) - static_cast<double>(a * a + b * b) / n;
}

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, const ForestParams& p,
              const std::vector<int>& pool, const std::vector<int>& ids, std::mt19937_64& rng)
      : x_(x), y_(y), p_(p), pool_(pool), ids_(ids), rng_(rng) {}

  DecisionTree build(std::vector<int> samples) {
    DecisionTree tree;
    grow(tree, std::move(samples));
    return tree;
  }

 private:
  int grow(DecisionTree& tree, std::vector<int> samples) {
    const int at = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    TreeNode node;
    for (int s : samples) ++node.counts[static_cast<std::size_t>(y_(s))];
    const int n = static_cast<int>(samples.size());
    const bool pure = node.counts[0] == 0 || node.counts[1] == 0;
    if (pure || n < 2 * p_.nodesize) {
      tree.nodes[static_cast<std::size_t>(at)] = node;
      return at;
    }

    // Partial Fisher-Yates over the canonical pool, then candidates in id order.
    std::vector<int> cand = pool_;
    const int m = std::min<int>(p_.mtry, static_cast<int>(cand.size()));
    for (int k = 0; k < m; ++k) {
      std::uniform_int_distribution<int> pick(k, static_cast<int>(cand.size()) - 1);
      std::swap(cand[static_cast<std::size_t>(k)], cand[static_cast<std::size_t>(pick(rng_))]);
    }
    cand.resize(static_cast<std::size_t>(m));
    std::sort(cand.begin(), cand.end(), [&](int a, int b) { return ids_[a] < ids_[b]; });

    const double parent = gini_mass(node.counts[0], node.counts[1]);
    double best = parent - 1e-12;
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::pair<double, int>> vals(samples.size());
    for (int f : cand) {
      for (std::size_t s = 0; s < samples.size(); ++s) vals[s] = {x_(samples[s], f), y_(samples[s])};
      std::sort(vals.begin(), vals.end());
      std::array<int, 2> left{};
      for (int k = 0; k + 1 < n; ++k) {
        ++left[static_cast<std::size_t>(vals[static_cast<std::size_t>(k)].second)];
        const double v = vals[static_cast<std::size_t>(k)].first, next = vals[static_cast<std::size_t>(k) + 1].first;
        if (v == next) continue;
        const int nl = k + 1, nr = n - nl;
        if (nl < p_.nodesize || nr < p_.nodesize) continue;
        const double imp = gini_mass(left[0], left[1]) +
                           gini_mass(node.counts[0] - left[0], node.counts[1] - left[1]);
        if (imp < best) {
          best = imp;
          best_feature = f;
          best_threshold = 0.5 * (v + next);
        }
      }
    }
    if (best_feature < 0) {
      tree.nodes[static_cast<std::size_t>(at)] = node;
      return at;
    }
    std::vector<int> ls, rs;
    for (int s : samples) (x_(s, best_feature) <= best_threshold ? ls : rs).push_back(s);
    samples.clear();
    samples.shrink_to_fit();
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = grow(tree, std::move(ls));
    node.right = grow(tree, std::move(rs));
    tree.nodes[static_cast<std::size_t>(at)] = node;
    return at;
  }

  const Eigen::MatrixXd& x_;
  const Eigen::VectorXi& y_;
  const ForestParams& p_;
  const std::vector<int>& pool_;
  const std::vector<int>& ids_;
  std::mt19937_64& rng_;
};

}  // namespace

ForestModel rf_train(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, const ForestParams& params) {
  const Eigen::Index n = x.rows(), p = x.cols();
  if (n == 0 || p == 0) throw Error(ErrorCode::kEmptyData, "random forest needs rows and features");
  if (y.size() != n) throw Error(ErrorCode::kDimensionMismatch, "random forest X/y row mismatch");
  if (params.mtry < 1 || params.mtry > p) {
    throw Error(ErrorCode::kInvalidArgument, "mtry=" + std::to_string(params.mtry) + " must lie in [1, " +
                                                 std::to_string(p) + "]");
  }
  if (params.n_trees < 1 || params.nodesize < 1) {
    throw Error(ErrorCode::kInvalidArgument, "n_trees and nodesize must be positive");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y(i) != 0 && y(i) != 1) throw Error(ErrorCode::kInvalidArgument, "forest labels must be 0 or 1");
  }
  std::vector<int> ids = params.feature_ids;
  if (ids.empty()) {
    ids.resize(static_cast<std::size_t>(p));
    std::iota(ids.begin(), ids.end(), 0);
  }
  if (static_cast<Eigen::Index>(ids.size()) != p) {
    throw Error(ErrorCode::kInvalidArgument, "feature_ids must name every column");
  }
  std::vector<int> pool(static_cast<std::size_t>(p));
  std::iota(pool.begin(), pool.end(), 0);
  std::sort(pool.begin(), pool.end(), [&](int a, int b) { return ids[a] < ids[b]; });

  ForestModel model;
  model.proportion_vote = params.proportion_vote;
  model.n_features = static_cast<std::size_t>(p);
  model.trees.resize(static_cast<std::size_t>(params.n_trees));
  parallel_for(model.trees.size(), params.threads, [&](std::size_t t) {
    std::seed_seq seq{static_cast<std::uint32_t>(params.seed), static_cast<std::uint32_t>(params.seed >> 32),
                      static_cast<std::uint32_t>(t), 0xf0e57u};
    std::mt19937_64 rng(seq);
    std::uniform_int_distribution<int> draw(0, static_cast<int>(n) - 1);
    std::vector<int> boot(static_cast<std::size_t>(n));
    for (auto& b : boot) b = draw(rng);
    model.trees[t] = TreeBuilder(x, y, params, pool, ids, rng).build(std::move(boot));
  });
  return model;
}

nlohmann::json to_json(const ForestModel& m) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : m.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& nd : t.nodes) {
      nodes.push_back({nd.feature, nd.threshold, nd.left, nd.right, nd.counts[0], nd.counts[1]});
    }
    trees.push_back(nodes);
  }
  return {{"proportion_vote", m.proportion_vote}, {"n_features", m.n_features}, {"trees", trees}};
}

ForestModel forest_from_json(const nlohmann::json& j) {
  ForestModel m;
  m.proportion_vote = j.at("proportion_vote");
  m.n_features = j.at("n_features");
  for (const auto& t : j.at("trees")) {
    DecisionTree tree;
    for (const auto& nd : t) {
      tree.nodes.push_back({nd[0].get<int>(), nd[1].get<double>(), nd[2].get<int>(), nd[3].get<int>(),
                            {nd[4].get<int>(), nd[5].get<int>()}});
    }
    m.trees.push_back(std::move(tree));
  }
  return m;
}

}  // namespace chestprog::classify
