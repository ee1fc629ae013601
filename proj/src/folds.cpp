#include <algorithm>
#include <map>
#include <random>

#include "chestprog/error.hpp"
#include "chestprog/eval.hpp"

namespace chestprog::eval {

namespace {

/// match_group -> (case row, control row); throws unless every group is one matched pair.
std::map<int, std::pair<std::size_t, std::size_t>> matched_pairs(std::span<const StudyMeta> studies) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < studies.size(); ++i) groups[studies[i].match_group].push_back(i);
  std::map<int, std::pair<std::size_t, std::size_t>> pairs;
  for (const auto& [g, rows] : groups) {
    if (rows.size() != 2 || studies[rows[0]].label == studies[rows[1]].label)
      throw Error(ErrorCode::kUnmatchedCohort, "match group " + std::to_string(g) + " (study '" +
                                                   studies[rows[0]].id +
                                                   "') is not one case plus one matched control");
    const bool first_case = studies[rows[0]].label == 1;
    pairs[g] = first_case ? std::pair{rows[0], rows[1]} : std::pair{rows[1], rows[0]};
  }
  return pairs;
}

std::mt19937_64 seeded(std::uint64_t seed, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag};
  return std::mt19937_64(seq);
}

}  // namespace

FoldPlan make_folds(std::span<const StudyMeta> studies, int k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::kInvalidArgument, "need at least 2 folds");
  const auto pairs = matched_pairs(studies);
  if (pairs.empty()) throw Error(ErrorCode::kEmptyData, "cohort has no matched pairs");
  if (pairs.size() % static_cast<std::size_t>(k) != 0)
    throw Error(ErrorCode::kInvalidArgument, std::to_string(pairs.size()) + " matched pairs cannot be split evenly into " +
                                                 std::to_string(k) + " folds");
  std::vector<std::pair<std::size_t, std::size_t>> order;
  for (const auto& [g, p] : pairs) order.push_back(p);
  auto rng = seeded(seed, 0x666f6c64u);
  std::shuffle(order.begin(), order.end(), rng);

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.folds.resize(static_cast<std::size_t>(k));
  std::vector<int> fold_of(studies.size(), -1);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const int f = static_cast<int>(i % static_cast<std::size_t>(k));
    fold_of[order[i].first] = f;
    fold_of[order[i].second] = f;
  }
  for (std::size_t r = 0; r < studies.size(); ++r)
    for (int f = 0; f < k; ++f) (fold_of[r] == f ? plan.folds[static_cast<std::size_t>(f)].test
                                                 : plan.folds[static_cast<std::size_t>(f)].train)
                                    .push_back(r);
  return plan;
}

std::vector<StudyMeta> permute_labels(std::span<const StudyMeta> studies, std::uint64_t seed) {
  const auto pairs = matched_pairs(studies);
  std::vector<StudyMeta> out(studies.begin(), studies.end());
  auto rng = seeded(seed, 0x7065726du);
  std::bernoulli_distribution flip(0.5);
  for (const auto& [g, p] : pairs)
    if (flip(rng)) std::swap(out[p.first].label, out[p.second].label);
  return out;
}

FeatureTable permute_labels(const FeatureTable& table, std::uint64_t seed) {
  FeatureTable t(table.column_names(), permute_labels(table.studies(), seed), table.values());
  t.catalog_version = table.catalog_version;
  return t;
}

}  // namespace chestprog::eval
