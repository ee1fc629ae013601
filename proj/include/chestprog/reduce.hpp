#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace chestprog::reduce {

struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;             // population; 1 for zero-variance columns
  std::vector<bool> zero_variance;    // flagged columns pass through as zeros
};

/// Needs at least two rows.
Standardizer standardize_fit(const Eigen::MatrixXd& x);
Eigen::MatrixXd standardize_apply(const Standardizer& s, const Eigen::MatrixXd& x);

struct LassoOptions {
  double tolerance = 1e-7;  // stop when the largest coefficient change falls below this
  int max_sweeps = 10000;
};

struct LassoResult {
  Eigen::VectorXd beta;
  double lambda = 0.0;
  int sweeps = 0;
  bool converged = false;
};

/// Coordinate descent for min_b (1/2n)||y - X b||^2 + lambda ||b||_1 (no intercept).
LassoResult lasso_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda,
                      const LassoOptions& opts = {});

/// Smallest lambda at which every coefficient is zero: max_j |x_j^T y| / n.
double lasso_lambda_max(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

double soft_threshold(double z, double gamma);

struct LassoCvOptions {
  int folds = 3;
  int grid_size = 40;
  double min_ratio = 1e-3;  // grid spans lambda_max * [min_ratio, 1], log-spaced
};

/// Lambda minimizing mean validation squared error over an inner k-fold split (row i goes
/// to fold i mod k). Ties resolve to the larger lambda.
double lasso_select_lambda(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                           const LassoCvOptions& cv = {}, const LassoOptions& opts = {});

struct PcaTarget {
  std::optional<int> components;  // exact k, else smallest k reaching variance_fraction
  double variance_fraction = 0.95;
};

struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;          // cols x k, orthonormal columns
  Eigen::VectorXd explained_variance;  // eigenvalues of X^T X / n, nonincreasing
  Eigen::VectorXd explained_fraction;  // relative to total variance
  bool dual = false;                   // fitted through the n x n gram matrix
};

/// Top-k eigenvectors of the covariance; the n x n dual is used when cols > rows.
/// Sign convention: each component's largest-magnitude entry is positive.
PcaModel pca_fit(const Eigen::MatrixXd& x, const PcaTarget& target);

enum class ReductionKind { kIdentity, kLasso, kPca };

std::string_view to_string(ReductionKind kind);
std::optional<ReductionKind> parse_reduction(std::string_view name);

struct ReductionOptions {
  ReductionKind kind = ReductionKind::kIdentity;
  bool standardize = true;
  std::optional<double> lambda;  // nullopt: inner cross-validation
  LassoCvOptions lasso_cv;
  LassoOptions lasso;
  PcaTarget pca;
};

struct ReductionTransform {
  ReductionKind kind = ReductionKind::kIdentity;
  bool standardized = true;
  Standardizer scaler;
  std::size_t input_dim = 0;
  // lasso
  std::vector<int> selected;
  Eigen::VectorXd coefficients;
  double lambda = 0.0;
  // pca
  PcaModel pca;
  // audit trail: which rows the transform saw
  int training_fold = -1;
  std::vector<std::string> fitted_on;

  std::size_t output_dim() const;
};

/// Fits on the given training rows only. `y` holds 0/1 labels (used by LASSO).
/// A LASSO fit that selects nothing keeps the single column with the largest |x_j^T y|.
ReductionTransform fit_reduction(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                 const ReductionOptions& opts, int training_fold = -1,
                                 std::vector<std::string> fitted_on = {});

Eigen::MatrixXd reduce_apply(const ReductionTransform& t, const Eigen::MatrixXd& rows);

nlohmann::json to_json(const ReductionTransform& t);
ReductionTransform reduction_from_json(const nlohmann::json& j);

nlohmann::json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const nlohmann::json& j);
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

}  // namespace chestprog::reduce
