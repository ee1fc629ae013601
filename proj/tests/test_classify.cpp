#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "chestprog/classifier.hpp"
#include "test_support.hpp"

using namespace chestprog;
using namespace chestprog::classify;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

namespace {

struct Blobs {
  MatrixXd x;
  VectorXd y;  // -1 / +1
};

Blobs blobs(int per_class, double gap, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Blobs b{MatrixXd(2 * per_class, 2), VectorXd(2 * per_class)};
  for (int i = 0; i < 2 * per_class; ++i) {
    const double s = i < per_class ? -1.0 : 1.0;
    b.x.row(i) << s * gap + n(rng), s * gap + n(rng);
    b.y(i) = s;
  }
  return b;
}

SvmParams linear(double c) {
  SvmParams p;
  p.kernel.kind = KernelKind::kLinear;
  p.c = c;
  p.tolerance = 1e-8;
  return p;
}

double sign_accuracy(const SvmModel& m, const MatrixXd& x, const VectorXd& y) {
  int ok = 0;
  for (int i = 0; i < x.rows(); ++i) ok += (m.decision(x.row(i).transpose()) > 0) == (y(i) > 0);
  return static_cast<double>(ok) / x.rows();
}

}  // namespace

TEST(Kernel, RbfForms) {
  const Eigen::Vector2d a(0, 0), b(3, 4);
  EXPECT_DOUBLE_EQ(rbf_kernel(0.01)(a, b), std::exp(-0.25));
  EXPECT_DOUBLE_EQ(rbf_kernel(5.0, RbfForm::kBandwidth)(a, b), std::exp(-0.5));
  Kernel lin;
  EXPECT_EQ(lin(a, b), 0.0);
  EXPECT_THROW(rbf_kernel(0.0), Error);
}

TEST(Svm, TwoPointMaxMargin) {
  MatrixXd x(2, 1);
  x << -1, 1;
  VectorXd y(2);
  y << -1, 1;
  const auto m = svm_train(x, y, linear(1e6));
  EXPECT_NEAR(m.decision(VectorXd::Zero(1)), 0.0, 1e-4);
  EXPECT_NEAR(m.decision(VectorXd::Ones(1)), 1.0, 1e-4);  // |w| = 1, margin 2
  EXPECT_NEAR(m.alpha(0), 0.5, 1e-4);
  EXPECT_NEAR(m.alpha(1), 0.5, 1e-4);
  EXPECT_NEAR(m.probability(VectorXd::Zero(1)), 1.0 / (1.0 + std::exp(m.platt_b)), 1e-3);
}

TEST(Svm, SeparableBlobsAndDualFeasibility) {
  const auto b = blobs(30, 4.0, 2);
  const auto m = svm_train(b.x, b.y, linear(100.0));
  EXPECT_EQ(sign_accuracy(m, b.x, b.y), 1.0);
  for (int i = 0; i < m.alpha.size(); ++i) {
    EXPECT_GE(m.alpha(i), 0.0);
    EXPECT_LE(m.alpha(i), 100.0);
  }
  EXPECT_NEAR(m.alpha.dot(m.labels), 0.0, 1e-6);
  double hinge = 0;
  for (int i = 0; i < b.x.rows(); ++i) hinge += std::max(0.0, 1.0 - b.y(i) * m.decision(b.x.row(i).transpose()));
  EXPECT_LT(hinge, 1e-3);
}

TEST(Svm, XorWithDefaultGammaAndC) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  MatrixXd x(80, 2);
  VectorXd y(80);
  for (int i = 0; i < 80; ++i) {
    const int q = i % 4;
    const double sx = q & 1 ? 10.0 : -10.0, sy = q & 2 ? 10.0 : -10.0;
    x.row(i) << sx + n(rng), sy + n(rng);
    y(i) = sx * sy > 0 ? 1.0 : -1.0;
  }
  SvmParams p;
  p.kernel = rbf_kernel(0.01);
  p.c = 100.0;
  EXPECT_EQ(sign_accuracy(svm_train(x, y, p), x, y), 1.0);
}

TEST(Svm, RowPermutationInvariance) {
  const auto b = blobs(20, 1.0, 7);
  SvmParams p;
  p.kernel = rbf_kernel(0.5);
  p.c = 10.0;
  p.tolerance = 1e-9;
  const auto a = svm_train(b.x, b.y, p);
  std::vector<int> perm(b.x.rows());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(3));
  MatrixXd px(b.x.rows(), 2);
  VectorXd py(b.x.rows());
  for (int i = 0; i < b.x.rows(); ++i) {
    px.row(i) = b.x.row(perm[i]);
    py(i) = b.y(perm[i]);
  }
  const auto c = svm_train(px, py, p);
  const auto probe = blobs(10, 1.0, 99);
  for (int i = 0; i < probe.x.rows(); ++i) {
    EXPECT_NEAR(a.decision(probe.x.row(i).transpose()), c.decision(probe.x.row(i).transpose()), 1e-6);
  }
}

TEST(Svm, RejectsSingleClassAndBadLabels) {
  MatrixXd x = MatrixXd::Random(4, 2);
  EXPECT_THROW(svm_train(x, VectorXd::Ones(4), linear(1)), Error);
  VectorXd y(4);
  y << -1, 1, 0, 1;
  EXPECT_THROW(svm_train(x, y, linear(1)), Error);
}

TEST(Platt, SeparatedScoresGiveSteepSigmoid) {
  VectorXd f(6), y(6);
  f << -3, -2, -1, 1, 2, 3;
  y << -1, -1, -1, 1, 1, 1;
  const auto [a, b] = platt_fit(f, y);
  EXPECT_LT(a, 0.0);
  EXPECT_NEAR(b, 0.0, 1e-6);
}

TEST(Forest, ConstantTargetIsUnanimous) {
  const MatrixXd x = MatrixXd::Random(20, 3);
  for (int label : {0, 1}) {
    ForestParams p;
    p.n_trees = 25;
    const auto m = rf_train(x, VectorXi::Constant(20, label), p);
    for (int i = 0; i < 20; ++i) EXPECT_EQ(m.probability(x.row(i).transpose()), static_cast<double>(label));
  }
}

TEST(Forest, LearnsThresholdRule) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  MatrixXd x(200, 10);
  VectorXi y(200);
  for (int i = 0; i < 200; ++i) {
    for (int j = 0; j < 10; ++j) x(i, j) = n(rng);
    y(i) = x(i, 3) > 0 ? 1 : 0;
  }
  ForestParams p;
  p.n_trees = 100;
  p.seed = 4;
  const auto m = rf_train(x, y, p);
  int ok = 0;
  for (int i = 0; i < 200; ++i) ok += (m.probability(x.row(i).transpose()) >= 0.5) == (y(i) == 1);
  EXPECT_GE(ok, 198);
  for (const auto& t : m.trees)
    for (const auto& node : t.nodes) {
      if (node.feature < 0) {
        EXPECT_GE(node.counts[0] + node.counts[1], p.nodesize);
      }
    }
}

TEST(Forest, DeterministicAcrossThreads) {
  const MatrixXd x = MatrixXd::Random(60, 6);
  VectorXi y(60);
  for (int i = 0; i < 60; ++i) y(i) = x(i, 0) + x(i, 1) > 0;
  ForestParams p;
  p.n_trees = 40;
  p.seed = 9;
  const auto a = rf_train(x, y, p);
  p.threads = 4;
  const auto b = rf_train(x, y, p);
  EXPECT_EQ(to_json(a), to_json(b));
  p.seed = 10;
  EXPECT_NE(to_json(rf_train(x, y, p)), to_json(a));
}

TEST(Forest, ColumnPermutationWithMappedIds) {
  const MatrixXd x = MatrixXd::Random(80, 7);
  VectorXi y(80);
  for (int i = 0; i < 80; ++i) y(i) = x(i, 2) - 0.5 * x(i, 5) > 0;
  ForestParams p;
  p.n_trees = 60;
  p.seed = 2;
  const auto base = rf_train(x, y, p);
  const std::vector<int> perm = {4, 0, 6, 2, 1, 5, 3};  // new column c holds old column perm[c]
  MatrixXd px(80, 7);
  for (int c = 0; c < 7; ++c) px.col(c) = x.col(perm[c]);
  p.feature_ids = perm;
  const auto moved = rf_train(px, y, p);
  const MatrixXd probe = MatrixXd::Random(30, 7);
  for (int i = 0; i < 30; ++i) {
    Eigen::VectorXd row(7);
    for (int c = 0; c < 7; ++c) row(c) = probe(i, perm[c]);
    const double pa = base.probability(probe.row(i).transpose());
    EXPECT_EQ(pa, moved.probability(row));
    EXPECT_EQ(std::round(pa * 60) / 60, pa);
  }
}

TEST(Forest, RejectsBadMtry) {
  ForestParams p;
  p.mtry = 8;
  EXPECT_THROW(rf_train(MatrixXd::Random(10, 4), VectorXi::Zero(10), p), Error);
}

TEST(Classifier, ParseNames) {
  EXPECT_EQ(parse_classifier("lsvm"), ClassifierKind::kLsvm);
  EXPECT_EQ(parse_classifier("nlsvm"), ClassifierKind::kNlsvm);
  EXPECT_EQ(parse_classifier("rf"), ClassifierKind::kRf);
  EXPECT_FALSE(parse_classifier("knn").has_value());
  EXPECT_FALSE(wants_standardization(ClassifierKind::kRf));
  EXPECT_TRUE(wants_standardization(ClassifierKind::kNlsvm));
}

TEST(Classifier, DimensionMismatchThrows) {
  const auto b = blobs(5, 3.0, 1);
  ClassifierParams p;
  p.kind = ClassifierKind::kLsvm;
  const auto m = train_classifier(b.x, (b.y.array() > 0).cast<int>(), p);
  EXPECT_THROW(classify::classify(m, VectorXd::Zero(3)), Error);
}

TEST(RadiomicsModel, FileRoundTripAndCatalogCheck) {
  testkit::TempDir dir("model");
  const auto b = blobs(8, 3.0, 4);
  std::vector<StudyMeta> meta;
  for (int i = 0; i < b.x.rows(); ++i) meta.push_back({"s" + std::to_string(i), b.y(i) > 0, 100, i % 8});
  FeatureTable table({"f0", "f1"}, meta, b.x);
  table.catalog_version = "v-test";
  for (auto kind : {ClassifierKind::kLsvm, ClassifierKind::kNlsvm, ClassifierKind::kRf}) {
    ClassifierParams cp;
    cp.kind = kind;
    cp.forest.n_trees = 20;
    cp.forest.mtry = 1;
    cp.forest.nodesize = 1;
    reduce::ReductionOptions ro;
    ro.standardize = wants_standardization(kind);
    const VectorXi y = (b.y.array() > 0).cast<int>();
    RadiomicsModel model{table.catalog_version, table.column_names(),
                         reduce::fit_reduction(b.x, y.cast<double>(), ro), {}};
    model.classifier = train_classifier(reduce::reduce_apply(model.reduction, b.x), y, cp);
    write_model(model, dir / "m.json");
    const auto back = read_model(dir / "m.json");
    EXPECT_EQ(predict(back, table), predict(model, table)) << to_string(kind);
    for (double pr : predict(model, table)) {
      EXPECT_GE(pr, 0.0);
      EXPECT_LE(pr, 1.0);
    }
    FeatureTable other = table;
    other.catalog_version = "v-other";
    EXPECT_THROW(predict(model, other), Error);
  }
}
