#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "chestprog/eval.hpp"
#include "test_support.hpp"

using namespace chestprog;
using namespace chestprog::eval;

namespace {

struct Scored {
  std::vector<double> s;
  std::vector<int> y;
};

Scored random_scored(std::uint64_t seed, int n, int distinct) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> v(0, distinct - 1);
  Scored r;
  for (int i = 0; i < n; ++i) {
    r.y.push_back(i % 3 == 0 ? 1 : 0);
    r.s.push_back(v(rng) / static_cast<double>(distinct) + 0.1 * r.y.back());
  }
  std::shuffle(r.y.begin(), r.y.end(), rng);
  return r;
}

FeatureTable signal_table(int pairs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0, 1);
  auto meta = testkit::paired_meta(pairs);
  Eigen::MatrixXd x(2 * pairs, 5);
  for (int i = 0; i < x.rows(); ++i)
    for (int j = 0; j < 5; ++j) x(i, j) = n(rng) + (j == 0 ? 2.0 * meta[i].label : 0.0);
  FeatureTable t({"a", "b", "c", "d", "e"}, meta, x);
  t.catalog_version = "test";
  return t;
}

}  // namespace

TEST(Accuracy, ConfusionByHand) {
  // TP=5, TN=3, FP=1, FN=1.
  const std::vector<double> p = {0.9, 0.8, 0.7, 0.6, 0.5, 0.1, 0.2, 0.3, 0.6, 0.4};
  const std::vector<int> y = {1, 1, 1, 1, 1, 0, 0, 0, 0, 1};
  const auto r = accuracy(p, y);
  EXPECT_EQ(r.confusion, (Confusion{5, 3, 1, 1}));
  EXPECT_DOUBLE_EQ(r.accuracy, 0.8);
}

TEST(Accuracy, RandomAgainstRecount) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> p(37);
    std::vector<int> y(37);
    int ok = 0;
    for (int i = 0; i < 37; ++i) {
      p[i] = std::round(u(rng) * 10) / 10;
      y[i] = u(rng) < 0.5;
      ok += (p[i] >= 0.5) == (y[i] == 1);
    }
    EXPECT_EQ(accuracy(p, y).accuracy, ok / 37.0);
  }
}

TEST(Accuracy, EmptyRejected) { EXPECT_THROW(accuracy({}, {}), Error); }

TEST(Roc, PerfectRankingAndTies) {
  const std::vector<double> s = {0.1, 0.2, 0.8, 0.9};
  const std::vector<int> y = {0, 0, 1, 1};
  const auto r = roc_and_auc(s, y);
  EXPECT_EQ(r.auc, 1.0);
  EXPECT_EQ(r.points.front(), (RocPoint{0, 0}));
  EXPECT_EQ(r.points.back(), (RocPoint{1, 1}));
  const std::vector<double> flat(4, 0.3);
  const auto t = roc_and_auc(flat, y);
  EXPECT_EQ(t.auc, 0.5);
  EXPECT_EQ(t.points.size(), 2u);
}

TEST(Roc, AucEqualsMannWhitney) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto d = random_scored(seed, 20 + static_cast<int>(seed % 30), 2 + static_cast<int>(seed % 9));
    const auto r = roc_and_auc(d.s, d.y);
    EXPECT_NEAR(r.auc, testkit::mann_whitney_auc(d.s, d.y), 1e-12) << seed;
    std::vector<double> neg(d.s.size());
    for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = -d.s[i];
    EXPECT_NEAR(roc_and_auc(neg, d.y).auc, 1.0 - r.auc, 1e-12);
  }
}

TEST(Roc, SingleClassRejected) {
  const std::vector<double> s = {0.1, 0.2};
  const std::vector<int> y = {1, 1};
  EXPECT_THROW(roc_and_auc(s, y), Error);
}

TEST(Roc, TprAtTakesTopOfVerticalSegment) {
  RocCurve c;
  c.points = {{0, 0}, {0, 0.5}, {0.5, 0.5}, {0.5, 1.0}, {1, 1}};
  EXPECT_EQ(tpr_at(c, 0.0), 0.5);
  EXPECT_EQ(tpr_at(c, 0.25), 0.5);
  EXPECT_EQ(tpr_at(c, 0.5), 1.0);
  EXPECT_EQ(tpr_at(c, 1.0), 1.0);
}

TEST(AverageRoc, LinearAverage) {
  RocCurve diag, top;
  diag.points = {{0, 0}, {1, 1}};
  top.points = {{0, 0}, {0, 1}, {1, 1}};
  const std::vector<RocCurve> both = {diag, top};
  const auto grid = default_fpr_grid();
  ASSERT_EQ(grid.size(), 101u);
  const auto avg = average_roc(both, grid);
  EXPECT_DOUBLE_EQ(avg.mean_tpr[50], 0.75);
  EXPECT_DOUBLE_EQ(avg.std_tpr[50], 0.25);
  const std::vector<RocCurve> same = {diag, diag};
  for (double sd : average_roc(same, grid).std_tpr) EXPECT_EQ(sd, 0.0);
  EXPECT_THROW(average_roc(both, {}), Error);
}

TEST(AverageRoc, RandomCurvesMatchPointwise) {
  std::vector<RocCurve> curves;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto d = random_scored(seed + 300, 24, 6);
    curves.push_back(roc_and_auc(d.s, d.y));
  }
  const auto grid = default_fpr_grid();
  const auto avg = average_roc(curves, grid);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::vector<double> v;
    for (const auto& c : curves) v.push_back(tpr_at(c, grid[g]));
    const auto ms = mean_std(v);
    EXPECT_EQ(avg.mean_tpr[g], ms.mean);
    EXPECT_EQ(avg.std_tpr[g], ms.std);
  }
}

TEST(TTests, ReferenceOneSample) {
  const std::vector<double> x = {0.6, 0.7, 0.8, 0.6, 0.7, 0.7};
  const auto t = one_sample_ttest(x, 0.5);
  EXPECT_NEAR(t.t, 5.965587590013045, 1e-9);
  EXPECT_NEAR(t.p, 0.0018942471146003937, 1e-12);
  EXPECT_EQ(t.dof, 5);
  EXPECT_FALSE(t.degenerate);
}

TEST(TTests, PairedEqualsOneSampleOnDifferences) {
  const std::vector<double> a = {0.9, 0.7, 0.8, 0.75, 0.6, 0.85};
  const std::vector<double> b = {0.3, 0.0, 0.0, 0.15, -0.1, 0.15};
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const auto p = paired_ttest(a, b), o = one_sample_ttest(d, 0.0);
  EXPECT_NEAR(p.t, o.t, 1e-12);
  EXPECT_NEAR(p.p, o.p, 1e-12);
}

TEST(TTests, DegenerateCases) {
  const std::vector<double> same = {0.5, 0.5, 0.5};
  const auto a = one_sample_ttest(same, 0.5);
  EXPECT_TRUE(a.degenerate);
  EXPECT_EQ(a.t, 0.0);
  EXPECT_EQ(a.p, 1.0);
  const auto b = paired_ttest(same, same);
  EXPECT_TRUE(b.degenerate);
  EXPECT_EQ(b.p, 1.0);
  const std::vector<double> high = {0.8, 0.8, 0.8};
  const auto c = one_sample_ttest(high, 0.5);
  EXPECT_TRUE(c.degenerate);
  EXPECT_TRUE(std::isinf(c.t) && c.t > 0);
  EXPECT_EQ(c.p, 0.0);
  const std::vector<double> one = {0.7};
  EXPECT_THROW(one_sample_ttest(one), Error);
}

TEST(MeanStdTest, PopulationConvention) {
  const std::vector<double> x = {1, 3};
  const auto m = mean_std(x);
  EXPECT_EQ(m.mean, 2.0);
  EXPECT_EQ(m.std, 1.0);
}

TEST(Folds, TwentyFourPairsSixFolds) {
  const auto meta = testkit::paired_meta(24);
  const auto plan = make_folds(meta, 6, 42);
  ASSERT_EQ(plan.folds.size(), 6u);
  std::multiset<std::size_t> seen;
  for (const auto& f : plan.folds) {
    ASSERT_EQ(f.test.size(), 8u);
    EXPECT_EQ(f.train.size(), 40u);
    int cases = 0;
    std::set<int> groups;
    for (auto r : f.test) {
      cases += meta[r].label;
      groups.insert(meta[r].match_group);
      seen.insert(r);
    }
    EXPECT_EQ(cases, 4);
    EXPECT_EQ(groups.size(), 4u);
    for (auto r : f.train) EXPECT_EQ(groups.count(meta[r].match_group), 0u);
    EXPECT_TRUE(std::is_sorted(f.train.begin(), f.train.end()));
  }
  EXPECT_EQ(seen.size(), 48u);
  EXPECT_EQ(std::set<std::size_t>(seen.begin(), seen.end()).size(), 48u);
}

TEST(Folds, SeedDeterminism) {
  const auto meta = testkit::paired_meta(12);
  const auto a = make_folds(meta, 6, 7), b = make_folds(meta, 6, 7), c = make_folds(meta, 6, 8);
  bool differs = false;
  for (std::size_t f = 0; f < 6; ++f) {
    EXPECT_EQ(a.folds[f].test, b.folds[f].test);
    differs = differs || a.folds[f].test != c.folds[f].test;
  }
  EXPECT_TRUE(differs);
}

TEST(Folds, Errors) {
  EXPECT_THROW(make_folds(testkit::paired_meta(10), 6, 0), Error);
  auto meta = testkit::paired_meta(6);
  meta.pop_back();
  EXPECT_THROW(make_folds(meta, 3, 0), Error);
  meta = testkit::paired_meta(6);
  meta[1].label = 1;
  EXPECT_THROW(make_folds(meta, 3, 0), Error);
}

TEST(PermuteLabels, KeepsOneCasePerPair) {
  const auto meta = testkit::paired_meta(30);
  const auto p = permute_labels(meta, 3);
  int swapped = 0;
  for (std::size_t i = 0; i < meta.size(); i += 2) {
    EXPECT_EQ(p[i].label + p[i + 1].label, 1);
    swapped += p[i].label != meta[i].label;
  }
  EXPECT_GT(swapped, 5);
  EXPECT_LT(swapped, 25);
  const auto again = permute_labels(meta, 3);
  EXPECT_EQ(again, p);
}

TEST(Leakage, TestRowsDoNotReachTheModel) {
  const auto table = signal_table(12, 5);
  const auto plan = make_folds(table.studies(), 3, 1);
  for (auto kind : {reduce::ReductionKind::kLasso, reduce::ReductionKind::kPca}) {
    RadiomicsPipeline pipe;
    pipe.reduction.kind = kind;
    pipe.reduction.pca.components = 2;
    for (std::size_t f = 0; f < plan.folds.size(); ++f) {
      const auto& fold = plan.folds[f];
      Eigen::MatrixXd x = table.values();
      std::mt19937_64 rng(f);
      std::normal_distribution<double> n(0, 50);
      for (auto r : fold.test)
        for (int j = 0; j < x.cols(); ++j) x(static_cast<Eigen::Index>(r), j) = n(rng);
      FeatureTable moved(table.column_names(), table.studies(), x);
      moved.catalog_version = table.catalog_version;
      const auto a = fit_fold_model(table, fold, static_cast<int>(f), pipe, 9);
      const auto b = fit_fold_model(moved, fold, static_cast<int>(f), pipe, 9);
      EXPECT_EQ(classify::to_json(a).dump(), classify::to_json(b).dump());
      const std::set<std::string> fitted(a.reduction.fitted_on.begin(), a.reduction.fitted_on.end());
      for (auto r : fold.test) EXPECT_EQ(fitted.count(table.studies()[r].id), 0u);
      EXPECT_EQ(fitted.size(), fold.train.size());
    }
  }
}

TEST(Crossval, SignalTableReportShape) {
  const auto table = signal_table(12, 6);
  RadiomicsPipeline pipe;
  pipe.reduction.kind = reduce::ReductionKind::kLasso;
  const auto r = run_crossval(table, pipe, "lasso+nlsvm", 3, 6, 1);
  ASSERT_EQ(r.models.size(), 1u);
  const auto& m = r.models[0];
  EXPECT_EQ(m.folds.size(), 6u);
  EXPECT_GT(m.auc.mean, 0.8);
  for (const auto& f : m.folds) {
    EXPECT_EQ(f.test_ids.size(), 4u);
    EXPECT_EQ(f.probabilities.size(), 4u);
  }
  EXPECT_EQ(m.roc.fpr.size(), 101u);
  const auto threaded = run_crossval(table, pipe, "lasso+nlsvm", 3, 6, 4);
  EXPECT_EQ(to_json(threaded).dump(), to_json(r).dump());
}

TEST(Report, FilesAndJsonRoundTrip) {
  testkit::TempDir dir("report");
  const auto table = signal_table(6, 7);
  RadiomicsPipeline a, b;
  b.reduction.kind = reduce::ReductionKind::kPca;
  b.reduction.pca.components = 2;
  const auto plan = make_folds(table.studies(), 3, 2);
  auto report = assemble_report({crossval_radiomics(table, plan, a, "identity+nlsvm"),
                                  crossval_radiomics(table, plan, b, "pca+nlsvm")},
                                 2, 3);
  ASSERT_EQ(report.comparisons.size(), 2u);
  write_report(report, dir.path());
  for (auto f : {"metrics.csv", "roc.csv", "predictions.csv", "summary.txt", "report.json"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  const auto back = read_report(dir / "report.json");
  EXPECT_EQ(to_json(back).dump(), to_json(report).dump());
}
