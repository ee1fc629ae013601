#include "chestprog/reduce.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "chestprog/error.hpp"

namespace chestprog::reduce {

using nlohmann::json;

Standardizer standardize_fit(const Eigen::MatrixXd& x) {
  if (x.rows() < 2) throw Error(ErrorCode::kInvalidArgument, "standardization needs at least 2 rows");
  Standardizer s;
  const double n = static_cast<double>(x.rows());
  s.mean = x.colwise().sum().transpose() / n;
  s.stddev.resize(x.cols());
  s.zero_variance.assign(static_cast<std::size_t>(x.cols()), false);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double var = (x.col(c).array() - s.mean(c)).square().sum() / n;
    const double sd = std::sqrt(var);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(s.mean(c))))) {
      s.stddev(c) = 1.0;
      s.zero_variance[static_cast<std::size_t>(c)] = true;
    } else {
      s.stddev(c) = sd;
    }
  }
  return s;
}

Eigen::MatrixXd standardize_apply(const Standardizer& s, const Eigen::MatrixXd& x) {
  if (x.cols() != s.mean.size()) throw Error(ErrorCode::kDimensionMismatch, "standardizer column count");
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    if (s.zero_variance[static_cast<std::size_t>(c)]) {
      out.col(c).setZero();
    } else {
      out.col(c) = (x.col(c).array() - s.mean(c)) / s.stddev(c);
    }
  }
  return out;
}

double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

double lasso_lambda_max(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.rows() == 0 || x.cols() == 0) return 0.0;
  return (x.transpose() * y).cwiseAbs().maxCoeff() / static_cast<double>(x.rows());
}

LassoResult lasso_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda, const LassoOptions& opts) {
  if (!(lambda >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "lasso lambda must be nonnegative");
  if (x.rows() != y.size()) throw Error(ErrorCode::kDimensionMismatch, "lasso X/y row mismatch");
  if (!x.allFinite() || !y.allFinite()) throw Error(ErrorCode::kNonFinite, "lasso inputs must be finite");
  const Eigen::Index p = x.cols();
  const double n = static_cast<double>(x.rows());
  LassoResult res;
  res.beta = Eigen::VectorXd::Zero(p);
  res.lambda = lambda;
  if (p == 0 || x.rows() == 0) {
    res.converged = true;
    return res;
  }
  const Eigen::VectorXd col_sq = x.colwise().squaredNorm().transpose() / n;
  Eigen::VectorXd resid = y;
  for (res.sweeps = 1; res.sweeps <= opts.max_sweeps; ++res.sweeps) {
    double max_delta = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (col_sq(j) <= 0.0) continue;
      const double old = res.beta(j);
      const double rho = x.col(j).dot(resid) / n + col_sq(j) * old;
      const double updated = soft_threshold(rho, lambda) / col_sq(j);
      if (updated != old) {
        resid.noalias() -= (updated - old) * x.col(j);
        res.beta(j) = updated;
        max_delta = std::max(max_delta, std::abs(updated - old));
      }
    }
    if (max_delta < opts.tolerance) {
      res.converged = true;
      break;
    }
  }
  res.sweeps = std::min(res.sweeps, opts.max_sweeps);
  return res;
}

double lasso_select_lambda(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const LassoCvOptions& cv,
                           const LassoOptions& opts) {
  const double lmax = lasso_lambda_max(x, y);
  if (!(lmax > 0.0)) return 0.0;
  const int k = std::max(2, std::min<int>(cv.folds, static_cast<int>(x.rows())));
  std::vector<double> grid(static_cast<std::size_t>(cv.grid_size));
  for (int g = 0; g < cv.grid_size; ++g) {
    const double t = cv.grid_size > 1 ? static_cast<double>(g) / (cv.grid_size - 1) : 0.0;
    grid[static_cast<std::size_t>(g)] = lmax * std::pow(cv.min_ratio, t);
  }
  std::vector<double> err(grid.size(), 0.0);
  for (int f = 0; f < k; ++f) {
    std::vector<Eigen::Index> tr, va;
    for (Eigen::Index r = 0; r < x.rows(); ++r) (r % k == f ? va : tr).push_back(r);
    if (tr.empty() || va.empty()) continue;
    const Eigen::MatrixXd xt = x(tr, Eigen::all), xv = x(va, Eigen::all);
    const Eigen::VectorXd yt = y(tr), yv = y(va);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const auto fit = lasso_fit(xt, yt, grid[g], opts);
      err[g] += (yv - xv * fit.beta).squaredNorm() / static_cast<double>(va.size());
    }
  }
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    if (err[g] < err[best]) best = g;
  }
  return grid[best];
}

PcaModel pca_fit(const Eigen::MatrixXd& x, const PcaTarget& target) {
  const Eigen::Index n = x.rows(), p = x.cols();
  const Eigen::Index max_k = std::min<Eigen::Index>(n - 1, p);
  if (n < 2 || max_k < 1) throw Error(ErrorCode::kInvalidArgument, "PCA needs at least 2 rows and 1 column");
  if (target.components && (*target.components < 1 || *target.components > max_k)) {
    throw Error(ErrorCode::kInvalidArgument, "PCA k=" + std::to_string(*target.components) + " outside [1, " +
                                                 std::to_string(max_k) + "]");
  }
  PcaModel m;
  m.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd xc = x.rowwise() - m.mean.transpose();
  const double dn = static_cast<double>(n);
  m.dual = p > n;

  Eigen::VectorXd evals;
  Eigen::MatrixXd evecs;  // p x r, descending eigenvalue order
  if (m.dual) {
    const Eigen::MatrixXd gram = xc * xc.transpose() / dn;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    evals = es.eigenvalues().reverse();
    const Eigen::MatrixXd u = es.eigenvectors().rowwise().reverse();
    evecs = Eigen::MatrixXd::Zero(p, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (evals(i) > 0.0) evecs.col(i) = xc.transpose() * u.col(i) / std::sqrt(dn * evals(i));
    }
  } else {
    const Eigen::MatrixXd cov = xc.transpose() * xc / dn;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    evals = es.eigenvalues().reverse();
    evecs = es.eigenvectors().rowwise().reverse();
  }
  evals = evals.cwiseMax(0.0);
  const double total = evals.sum();

  Eigen::Index k = 0;
  if (target.components) {
    k = *target.components;
  } else {
    double acc = 0.0;
    for (k = 0; k < max_k;) {
      acc += evals(k);
      ++k;
      if (total <= 0.0 || acc / total >= target.variance_fraction) break;
    }
  }
  if (m.dual && !(evals(k - 1) > 1e-12 * std::max(evals(0), 1e-300))) {
    throw Error(ErrorCode::kInvalidArgument, "PCA k=" + std::to_string(k) + " exceeds the numerical rank");
  }
  m.components = evecs.leftCols(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::Index arg = 0;
    m.components.col(c).cwiseAbs().maxCoeff(&arg);
    if (m.components(arg, c) < 0.0) m.components.col(c) *= -1.0;
  }
  m.explained_variance = evals.head(k);
  m.explained_fraction = total > 0.0 ? Eigen::VectorXd(m.explained_variance / total) : Eigen::VectorXd::Zero(k);
  return m;
}

std::string_view to_string(ReductionKind kind) {
  switch (kind) {
    case ReductionKind::kIdentity: return "identity";
    case ReductionKind::kLasso: return "lasso";
    case ReductionKind::kPca: return "pca";
  }
  return "?";
}

std::optional<ReductionKind> parse_reduction(std::string_view name) {
  if (name == "identity") return ReductionKind::kIdentity;
  if (name == "lasso") return ReductionKind::kLasso;
  if (name == "pca") return ReductionKind::kPca;
  return std::nullopt;
}

std::size_t ReductionTransform::output_dim() const {
  switch (kind) {
    case ReductionKind::kIdentity: return input_dim;
    case ReductionKind::kLasso: return selected.size();
    case ReductionKind::kPca: return static_cast<std::size_t>(pca.components.cols());
  }
  return 0;
}

ReductionTransform fit_reduction(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const ReductionOptions& opts,
                                 int training_fold, std::vector<std::string> fitted_on) {
  if (!x.allFinite()) throw Error(ErrorCode::kNonFinite, "reduction input must be finite");
  ReductionTransform t;
  t.kind = opts.kind;
  t.standardized = opts.standardize || opts.kind != ReductionKind::kIdentity;
  t.input_dim = static_cast<std::size_t>(x.cols());
  t.training_fold = training_fold;
  t.fitted_on = std::move(fitted_on);
  Eigen::MatrixXd xs = x;
  if (t.standardized) {
    t.scaler = standardize_fit(x);
    xs = standardize_apply(t.scaler, x);
  }
  switch (opts.kind) {
    case ReductionKind::kIdentity: break;
    case ReductionKind::kLasso: {
      t.lambda = opts.lambda ? *opts.lambda : lasso_select_lambda(xs, y, opts.lasso_cv, opts.lasso);
      const auto fit = lasso_fit(xs, y, t.lambda, opts.lasso);
      t.coefficients = fit.beta;
      for (Eigen::Index j = 0; j < fit.beta.size(); ++j) {
        if (fit.beta(j) != 0.0) t.selected.push_back(static_cast<int>(j));
      }
      if (t.selected.empty() && xs.cols() > 0) {
        Eigen::Index arg = 0;
        (xs.transpose() * y).cwiseAbs().maxCoeff(&arg);
        t.selected.push_back(static_cast<int>(arg));
      }
      break;
    }
    case ReductionKind::kPca: t.pca = pca_fit(xs, opts.pca); break;
  }
  return t;
}

Eigen::MatrixXd reduce_apply(const ReductionTransform& t, const Eigen::MatrixXd& rows) {
  if (static_cast<std::size_t>(rows.cols()) != t.input_dim) {
    throw Error(ErrorCode::kDimensionMismatch, "reduction expects " + std::to_string(t.input_dim) +
                                                   " columns, got " + std::to_string(rows.cols()));
  }
  const Eigen::MatrixXd xs = t.standardized ? standardize_apply(t.scaler, rows) : rows;
  switch (t.kind) {
    case ReductionKind::kIdentity: return xs;
    case ReductionKind::kLasso: {
      std::vector<Eigen::Index> cols(t.selected.begin(), t.selected.end());
      return xs(Eigen::all, cols);
    }
    case ReductionKind::kPca: return (xs.rowwise() - t.pca.mean.transpose()) * t.pca.components;
  }
  return xs;
}

json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vector_to_json(m.row(r).transpose()));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  Eigen::MatrixXd m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
  for (Eigen::Index r = 0; r < m.rows(); ++r) m.row(r) = vector_from_json(j.at("data")[static_cast<std::size_t>(r)]).transpose();
  return m;
}

json to_json(const ReductionTransform& t) {
  json j = {{"kind", to_string(t.kind)},
            {"standardized", t.standardized},
            {"input_dim", t.input_dim},
            {"training_fold", t.training_fold},
            {"fitted_on", t.fitted_on}};
  if (t.standardized) {
    j["scaler"] = {{"mean", vector_to_json(t.scaler.mean)},
                   {"stddev", vector_to_json(t.scaler.stddev)},
                   {"zero_variance", t.scaler.zero_variance}};
  }
  if (t.kind == ReductionKind::kLasso) {
    j["lasso"] = {{"lambda", t.lambda}, {"selected", t.selected}, {"coefficients", vector_to_json(t.coefficients)}};
  }
  if (t.kind == ReductionKind::kPca) {
    j["pca"] = {{"mean", vector_to_json(t.pca.mean)},
                {"components", matrix_to_json(t.pca.components)},
                {"explained_variance", vector_to_json(t.pca.explained_variance)},
                {"explained_fraction", vector_to_json(t.pca.explained_fraction)},
                {"dual", t.pca.dual}};
  }
  return j;
}

ReductionTransform reduction_from_json(const json& j) {
  ReductionTransform t;
  auto kind = parse_reduction(j.at("kind").get<std::string>());
  if (!kind) throw Error(ErrorCode::kFormat, "unknown reduction kind");
  t.kind = *kind;
  t.standardized = j.at("standardized");
  t.input_dim = j.at("input_dim");
  t.training_fold = j.at("training_fold");
  t.fitted_on = j.at("fitted_on").get<std::vector<std::string>>();
  if (t.standardized) {
    const auto& s = j.at("scaler");
    t.scaler.mean = vector_from_json(s.at("mean"));
    t.scaler.stddev = vector_from_json(s.at("stddev"));
    t.scaler.zero_variance = s.at("zero_variance").get<std::vector<bool>>();
  }
  if (t.kind == ReductionKind::kLasso) {
    const auto& l = j.at("lasso");
    t.lambda = l.at("lambda");
    t.selected = l.at("selected").get<std::vector<int>>();
    t.coefficients = vector_from_json(l.at("coefficients"));
  }
  if (t.kind == ReductionKind::kPca) {
    const auto& p = j.at("pca");
    t.pca.mean = vector_from_json(p.at("mean"));
    t.pca.components = matrix_from_json(p.at("components"));
    t.pca.explained_variance = vector_from_json(p.at("explained_variance"));
    t.pca.explained_fraction = vector_from_json(p.at("explained_fraction"));
    t.pca.dual = p.at("dual");
  }
  return t;
}

}  // namespace chestprog::reduce
