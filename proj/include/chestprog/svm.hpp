#pragma once

#include <utility>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace chestprog::classify {

enum class KernelKind { kLinear, kRbf };

/// How an RBF width parameter is read: exp(-w ||d||^2) or exp(-||d||^2 / (2 w^2)).
enum class RbfForm { kGamma, kBandwidth };

struct Kernel {
  KernelKind kind = KernelKind::kLinear;
  double gamma = 0.01;  // rbf only, always stored in gamma form

  double operator()(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) const;
};

Kernel rbf_kernel(double width, RbfForm form = RbfForm::kGamma);

struct SvmParams {
  Kernel kernel;
  double c = 100.0;
  double tolerance = 1e-4;  // maximal KKT violation m(a) - M(a) at exit
  long max_iterations = 10'000'000;
};

struct SvmModel {
  Kernel kernel;
  double c = 0.0;
  Eigen::MatrixXd support;  // support vectors, one per row
  Eigen::VectorXd coef;     // alpha_i * y_i for each support vector
  double bias = 0.0;
  double platt_a = 0.0;     // P(y = 1 | f) = 1 / (1 + exp(a f + b))
  double platt_b = 0.0;

  // Training diagnostics (not serialized): dual variables and labels for every row.
  Eigen::VectorXd alpha;
  Eigen::VectorXd labels;
  long iterations = 0;

  double decision(const Eigen::Ref<const Eigen::VectorXd>& row) const;
  double probability(const Eigen::Ref<const Eigen::VectorXd>& row) const;
};

/// Soft-margin dual solved by sequential pairwise (SMO) updates with second-order
/// working-set selection. Labels must be -1/+1 with both classes present. The probability
/// map is a maximum-likelihood sigmoid fitted on the training decision values.
SvmModel svm_train(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const SvmParams& params);

/// Sigmoid (a, b) maximizing the likelihood of labels y (-1/+1) given decision values f,
/// with the usual smoothed targets; Newton's method with backtracking.
std::pair<double, double> platt_fit(const Eigen::VectorXd& f, const Eigen::VectorXd& y);

nlohmann::json to_json(const SvmModel& m);
SvmModel svm_from_json(const nlohmann::json& j);

}  // namespace chestprog::classify
