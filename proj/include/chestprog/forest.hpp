#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace chestprog::classify {

struct ForestParams {
  int n_trees = 900;
  int nodesize = 5;  // minimum training samples in every leaf
  int mtry = 3;
  std::uint64_t seed = 0;
  /// Canonical identity of each column, used for candidate sampling and split tie-breaks.
  /// Empty means column position. Lets a column permutation be mapped back exactly.
  std::vector<int> feature_ids;
  bool proportion_vote = false;  // average leaf class-1 fractions instead of hard votes
  int threads = 1;
};

struct TreeNode {
  int feature = -1;  // -1 for a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::array<int, 2> counts{};  // training samples per class reaching this node
};

struct DecisionTree {
  std::vector<TreeNode> nodes;
  const TreeNode& leaf(const Eigen::Ref<const Eigen::VectorXd>& row) const;
};

struct ForestModel {
  std::vector<DecisionTree> trees;
  bool proportion_vote = false;
  std::size_t n_features = 0;

  /// Fraction of trees voting class 1 (leaf majority; an even leaf votes 0).
  double probability(const Eigen::Ref<const Eigen::VectorXd>& row) const;
};

/// Bootstrap-aggregated Gini trees. At each node mtry candidate features are drawn without
/// replacement; the best split minimizes the children's weighted Gini impurity, with ties
/// going to the lowest feature id, then the lowest threshold. Splits must leave at least
/// `nodesize` samples on each side and strictly reduce impurity. Tree t draws from an RNG
/// seeded by (seed, t), so results do not depend on `threads`.
ForestModel rf_train(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, const ForestParams& params);

nlohmann::json to_json(const ForestModel& m);
ForestModel forest_from_json(const nlohmann::json& j);

}  // namespace chestprog::classify
