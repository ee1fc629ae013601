#include "chestprog/svm.hpp"

#include <cmath>
#include <limits>

#include "chestprog/error.hpp"
#include "chestprog/reduce.hpp"

namespace chestprog::classify {

double Kernel::operator()(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) const {
  if (kind == KernelKind::kLinear) return a.dot(b);
  return std::exp(-gamma * (a - b).squaredNorm());
}

Kernel rbf_kernel(double width, RbfForm form) {
  if (!(width > 0.0)) throw Error(ErrorCode::kInvalidArgument, "RBF width must be positive");
  return {KernelKind::kRbf, form == RbfForm::kGamma ? width : 1.0 / (2.0 * width * width)};
}

double SvmModel::decision(const Eigen::Ref<const Eigen::VectorXd>& row) const {
  double f = bias;
  for (Eigen::Index s = 0; s < support.rows(); ++s) f += coef(s) * kernel(support.row(s).transpose(), row);
  return f;
}

double SvmModel::probability(const Eigen::Ref<const Eigen::VectorXd>& row) const {
  const double z = platt_a * decision(row) + platt_b;
  // Written to stay finite for large |z|.
  return z >= 0.0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
}

SvmModel svm_train(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const SvmParams& params) {
  const Eigen::Index n = x.rows();
  if (n == 0 || y.size() != n) throw Error(ErrorCode::kEmptyData, "SVM needs labelled rows");
  if (!(params.c > 0.0)) throw Error(ErrorCode::kInvalidArgument, "SVM C must be positive");
  if (!x.allFinite()) throw Error(ErrorCode::kNonFinite, "SVM input must be finite");
  bool pos = false, neg = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y(i) == 1.0) pos = true;
    else if (y(i) == -1.0) neg = true;
    else throw Error(ErrorCode::kInvalidArgument, "SVM labels must be -1 or +1");
  }
  if (!pos || !neg) throw Error(ErrorCode::kSingleClass, "SVM needs both classes");

  const double c = params.c;
  Eigen::MatrixXd q(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      q(i, j) = q(j, i) = y(i) * y(j) * params.kernel(x.row(i).transpose(), x.row(j).transpose());
    }
  }
  constexpr double kTau = 1e-12;
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd grad = Eigen::VectorXd::Constant(n, -1.0);
  auto in_up = [&](Eigen::Index t) { return (y(t) > 0 && alpha(t) < c) || (y(t) < 0 && alpha(t) > 0); };
  auto in_low = [&](Eigen::Index t) { return (y(t) > 0 && alpha(t) > 0) || (y(t) < 0 && alpha(t) < c); };

  long iter = 0;
  for (; iter < params.max_iterations; ++iter) {
    Eigen::Index i = -1;
    double gmax = -std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      if (in_up(t) && -y(t) * grad(t) > gmax) {
        gmax = -y(t) * grad(t);
        i = t;
      }
    }
    Eigen::Index j = -1;
    double gmin = std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      const double v = -y(t) * grad(t);
      gmin = std::min(gmin, v);
      if (i < 0) continue;
      const double b = gmax - v;
      if (b > 0.0) {
        double a = q(i, i) + q(t, t) - 2.0 * y(i) * y(t) * q(i, t);
        if (a <= 0.0) a = kTau;
        const double obj = -(b * b) / a;
        if (obj < best) {
          best = obj;
          j = t;
        }
      }
    }
    if (i < 0 || j < 0 || gmax - gmin < params.tolerance) break;

    const double old_i = alpha(i), old_j = alpha(j);
    if (y(i) != y(j)) {
      double quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad(i) - grad(j)) / quad;
      const double diff = alpha(i) - alpha(j);
      alpha(i) += delta;
      alpha(j) += delta;
      if (diff > 0.0) {
        if (alpha(j) < 0.0) { alpha(j) = 0.0; alpha(i) = diff; }
      } else if (alpha(i) < 0.0) {
        alpha(i) = 0.0; alpha(j) = -diff;
      }
      if (diff > 0.0) {
        if (alpha(i) > c) { alpha(i) = c; alpha(j) = c - diff; }
      } else if (alpha(j) > c) {
        alpha(j) = c; alpha(i) = c + diff;
      }
    } else {
      double quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad(i) - grad(j)) / quad;
      const double sum = alpha(i) + alpha(j);
      alpha(i) -= delta;
      alpha(j) += delta;
      if (sum > c) {
        if (alpha(i) > c) { alpha(i) = c; alpha(j) = sum - c; }
      } else if (alpha(j) < 0.0) {
        alpha(j) = 0.0; alpha(i) = sum;
      }
      if (sum > c) {
        if (alpha(j) > c) { alpha(j) = c; alpha(i) = sum - c; }
      } else if (alpha(i) < 0.0) {
        alpha(i) = 0.0; alpha(j) = sum;
      }
    }
    const double di = alpha(i) - old_i, dj = alpha(j) - old_j;
    grad += q.col(i) * di + q.col(j) * dj;
  }

  double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
  int n_free = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = y(t) * grad(t);
    if (alpha(t) >= c) {
      if (y(t) < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (alpha(t) <= 0.0) {
      if (y(t) > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / n_free : 0.5 * (ub + lb);

  SvmModel m;
  m.kernel = params.kernel;
  m.c = c;
  m.bias = -rho;
  m.alpha = alpha;
  m.labels = y;
  m.iterations = iter;
  std::vector<Eigen::Index> sv;
  for (Eigen::Index t = 0; t < n; ++t) {
    if (alpha(t) > 0.0) sv.push_back(t);
  }
  m.support = x(sv, Eigen::all);
  m.coef.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t s = 0; s < sv.size(); ++s) m.coef(static_cast<Eigen::Index>(s)) = alpha(sv[s]) * y(sv[s]);

  Eigen::VectorXd f(n);
  for (Eigen::Index t = 0; t < n; ++t) f(t) = m.decision(x.row(t).transpose());
  std::tie(m.platt_a, m.platt_b) = platt_fit(f, y);
  return m;
}

std::pair<double, double> platt_fit(const Eigen::VectorXd& f, const Eigen::VectorXd& y) {
  const Eigen::Index n = f.size();
  double prior1 = 0, prior0 = 0;
  for (Eigen::Index i = 0; i < n; ++i) (y(i) > 0 ? prior1 : prior0) += 1.0;
  const double hi = (prior1 + 1.0) / (prior1 + 2.0), lo = 1.0 / (prior0 + 2.0);
  Eigen::VectorXd t(n);
  for (Eigen::Index i = 0; i < n; ++i) t(i) = y(i) > 0 ? hi : lo;

  auto objective = [&](double a, double b) {
    double v = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double z = f(i) * a + b;
      v += z >= 0.0 ? t(i) * z + std::log1p(std::exp(-z)) : (t(i) - 1.0) * z + std::log1p(std::exp(z));
    }
    return v;
  };
  double a = 0.0, b = std::log((prior0 + 1.0) / (prior1 + 1.0));
  double fval = objective(a, b);
  constexpr double kSigma = 1e-12, kMinStep = 1e-10;
  for (int it = 0; it < 100; ++it) {
    double h11 = kSigma, h22 = kSigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double z = f(i) * a + b;
      double p, qv;
      if (z >= 0.0) {
        p = std::exp(-z) / (1.0 + std::exp(-z));
        qv = 1.0 / (1.0 + std::exp(-z));
      } else {
        p = 1.0 / (1.0 + std::exp(z));
        qv = std::exp(z) / (1.0 + std::exp(z));
      }
      const double d2 = p * qv;
      h11 += f(i) * f(i) * d2;
      h22 += d2;
      h21 += f(i) * d2;
      const double d1 = t(i) - p;
      g1 += f(i) * d1;
      g2 += d1;
    }
    if (std::abs(g1) < 1e-5 && std::abs(g2) < 1e-5) break;
    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    while (step >= kMinStep) {
      const double na = a + step * da, nb = b + step * db;
      const double nf = objective(na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        a = na;
        b = nb;
        fval = nf;
        break;
      }
      step /= 2.0;
    }
    if (step < kMinStep) break;
  }
  return {a, b};
}

nlohmann::json to_json(const SvmModel& m) {
  return {{"kernel", m.kernel.kind == KernelKind::kLinear ? "linear" : "rbf"},
          {"gamma", m.kernel.gamma},
          {"c", m.c},
          {"support", reduce::matrix_to_json(m.support)},
          {"coef", reduce::vector_to_json(m.coef)},
          {"bias", m.bias},
          {"platt_a", m.platt_a},
          {"platt_b", m.platt_b}};
}

SvmModel svm_from_json(const nlohmann::json& j) {
  SvmModel m;
  m.kernel.kind = j.at("kernel") == "rbf" ? KernelKind::kRbf : KernelKind::kLinear;
  m.kernel.gamma = j.at("gamma");
  m.c = j.at("c");
  m.support = reduce::matrix_from_json(j.at("support"));
  m.coef = reduce::vector_from_json(j.at("coef"));
  m.bias = j.at("bias");
  m.platt_a = j.at("platt_a");
  m.platt_b = j.at("platt_b");
  return m;
}

}  // namespace chestprog::classify
