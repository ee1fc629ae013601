#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "chestprog/error.hpp"
#include "chestprog/eval.hpp"

namespace chestprog::eval {

namespace {

void check_labels(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw Error(ErrorCode::kDimensionMismatch, "got " + std::to_string(scores.size()) + " scores for " +
                                                   std::to_string(labels.size()) + " labels");
  if (scores.empty()) throw Error(ErrorCode::kEmptyData, "no predictions to evaluate");
  for (int y : labels)
    if (y != 0 && y != 1) throw Error(ErrorCode::kInvalidArgument, "labels must be 0 or 1");
}

}  // namespace

AccuracyResult accuracy(std::span<const double> probabilities, std::span<const int> labels, double threshold) {
  check_labels(probabilities, labels);
  AccuracyResult r;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pos = probabilities[i] >= threshold;
    if (labels[i] == 1) (pos ? r.confusion.tp : r.confusion.fn)++;
    else (pos ? r.confusion.fp : r.confusion.tn)++;
  }
  r.accuracy = static_cast<double>(r.confusion.tp + r.confusion.tn) / static_cast<double>(labels.size());
  return r;
}

RocCurve roc_and_auc(std::span<const double> scores, std::span<const int> labels) {
  check_labels(scores, labels);
  const auto npos = std::count(labels.begin(), labels.end(), 1);
  const auto nneg = static_cast<std::ptrdiff_t>(labels.size()) - npos;
  if (npos == 0 || nneg == 0) throw Error(ErrorCode::kSingleClass, "ROC needs both classes");
  for (double s : scores)
    if (!std::isfinite(s)) throw Error(ErrorCode::kNonFinite, "non-finite score");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve c;
  c.points.push_back({0.0, 0.0});
  std::ptrdiff_t tp = 0, fp = 0;
  // Trapezoids accumulated in integer half-units so the area is exact before the final division.
  long double twice_area = 0;
  for (std::size_t i = 0; i < order.size();) {
    const std::ptrdiff_t tp0 = tp, fp0 = fp;
    const double s = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] == 1 ? tp : fp)++;
    twice_area += static_cast<long double>(fp - fp0) * static_cast<long double>(tp + tp0);
    c.points.push_back({static_cast<double>(fp) / static_cast<double>(nneg), static_cast<double>(tp) / static_cast<double>(npos)});
  }
  c.auc = static_cast<double>(twice_area / (2.0L * static_cast<long double>(npos) * static_cast<long double>(nneg)));
  return c;
}

double tpr_at(const RocCurve& curve, double fpr) {
  const auto& p = curve.points;
  if (p.empty()) throw Error(ErrorCode::kEmptyData, "empty ROC curve");
  double top = -1.0;
  for (const auto& q : p)
    if (q.fpr == fpr) top = std::max(top, q.tpr);
  if (top >= 0.0) return top;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i - 1].fpr < fpr && fpr < p[i].fpr) {
      const double w = (fpr - p[i - 1].fpr) / (p[i].fpr - p[i - 1].fpr);
      return p[i - 1].tpr + w * (p[i].tpr - p[i - 1].tpr);
    }
  }
  return fpr < p.front().fpr ? p.front().tpr : p.back().tpr;
}

std::vector<double> default_fpr_grid() {
  std::vector<double> g(101);
  for (int i = 0; i <= 100; ++i) g[static_cast<std::size_t>(i)] = i / 100.0;
  return g;
}

AveragedRoc average_roc(std::span<const RocCurve> curves, std::span<const double> grid) {
  if (grid.empty()) throw Error(ErrorCode::kEmptyData, "empty FPR grid");
  if (curves.empty()) throw Error(ErrorCode::kEmptyData, "no ROC curves to average");
  AveragedRoc r;
  r.fpr.assign(grid.begin(), grid.end());
  std::vector<double> t(curves.size());
  for (double g : grid) {
    for (std::size_t c = 0; c < curves.size(); ++c) t[c] = tpr_at(curves[c], g);
    const auto ms = mean_std(t);
    r.mean_tpr.push_back(ms.mean);
    r.std_tpr.push_back(ms.std);
  }
  return r;
}

MeanStd mean_std(std::span<const double> x) {
  if (x.empty()) throw Error(ErrorCode::kEmptyData, "mean of an empty sample");
  MeanStd r;
  r.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - r.mean) * (v - r.mean);
  r.std = std::sqrt(ss / static_cast<double>(x.size()));
  return r;
}

namespace {

TTest t_test_of(std::span<const double> d, std::string description) {
  if (d.size() < 2) throw Error(ErrorCode::kInvalidArgument, "t-test needs at least 2 observations");
  const double n = static_cast<double>(d.size());
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  TTest r;
  r.dof = static_cast<int>(d.size()) - 1;
  r.description = std::move(description);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (sd == 0.0) {
    r.degenerate = true;
    if (mean == 0.0) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = std::copysign(std::numeric_limits<double>::infinity(), mean);
      r.p = 0.0;
    }
    return r;
  }
  r.t = mean / (sd / std::sqrt(n));
  boost::math::students_t dist(static_cast<double>(r.dof));
  r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t))));
  return r;
}

}  // namespace

TTest paired_ttest(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw Error(ErrorCode::kDimensionMismatch, "paired t-test needs equal lengths, got " + std::to_string(a.size()) +
                                                   " and " + std::to_string(b.size()));
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return t_test_of(d, "paired t-test, n=" + std::to_string(a.size()) + ", two-sided");
}

TTest one_sample_ttest(std::span<const double> x, double mu0) {
  std::vector<double> d(x.begin(), x.end());
  for (auto& v : d) v -= mu0;
  std::string desc = "one-sample t-test vs mu0=" + std::to_string(mu0);
  desc.erase(desc.find_last_not_of('0') + 1);
  if (desc.back() == '.') desc.pop_back();
  return t_test_of(d, desc + ", n=" + std::to_string(x.size()) + ", two-sided");
}

}  // namespace chestprog::eval
