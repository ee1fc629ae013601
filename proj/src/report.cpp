#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "chestprog/error.hpp"
#include "chestprog/eval.hpp"
#include "chestprog/text_format.hpp"

namespace chestprog::eval {

namespace {

nlohmann::json real(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double real_from(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  if (s == "nan") return NAN;
  throw Error(ErrorCode::kFormat, "bad number '" + s + "' in report");
}

nlohmann::json ttest_json(const TTest& t) {
  return {{"t", real(t.t)}, {"p", t.p}, {"dof", t.dof}, {"degenerate", t.degenerate}, {"description", t.description}};
}

TTest ttest_from(const nlohmann::json& j) {
  TTest t;
  t.t = real_from(j.at("t"));
  t.p = j.at("p").get<double>();
  t.dof = j.at("dof").get<int>();
  t.degenerate = j.at("degenerate").get<bool>();
  t.description = j.at("description").get<std::string>();
  return t;
}

nlohmann::json roc_json(const RocCurve& c) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : c.points) pts.push_back({p.fpr, p.tpr});
  return {{"points", pts}, {"auc", c.auc}};
}

RocCurve roc_from(const nlohmann::json& j) {
  RocCurve c;
  for (const auto& p : j.at("points")) c.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  c.auc = j.at("auc").get<double>();
  return c;
}

std::string fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string p_text(const TTest& t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", t.p);
  return std::string(buf) + (t.degenerate ? " (degenerate)" : "");
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  return os;
}

}  // namespace

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json models = nlohmann::json::array();
  for (const auto& m : r.models) {
    nlohmann::json folds = nlohmann::json::array();
    for (const auto& f : m.folds) {
      const auto& c = f.accuracy.confusion;
      folds.push_back({{"fold", f.fold},
                       {"test_ids", f.test_ids},
                       {"labels", f.labels},
                       {"probabilities", f.probabilities},
                       {"accuracy", f.accuracy.accuracy},
                       {"confusion", {{"tp", c.tp}, {"tn", c.tn}, {"fp", c.fp}, {"fn", c.fn}}},
                       {"roc", roc_json(f.roc)},
                       {"fitted_on", f.fitted_on}});
    }
    models.push_back({{"model", m.model},
                      {"config", m.config},
                      {"folds", folds},
                      {"accuracy", {{"mean", m.accuracy.mean}, {"std", m.accuracy.std}}},
                      {"auc", {{"mean", m.auc.mean}, {"std", m.auc.std}}},
                      {"mean_roc", {{"fpr", m.roc.fpr}, {"mean_tpr", m.roc.mean_tpr}, {"std_tpr", m.roc.std_tpr}}},
                      {"auc_vs_chance", ttest_json(m.auc_vs_chance)}});
  }
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : r.comparisons)
    comps.push_back({{"model_a", c.model_a}, {"model_b", c.model_b}, {"metric", c.metric}, {"test", ttest_json(c.test)}});
  return {{"format", "chestprog-eval-report"}, {"version", 1}, {"seed", r.seed}, {"k", r.k},
          {"models", models}, {"comparisons", comps}};
}

EvalReport eval_report_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "chestprog-eval-report" || j.at("version") != 1)
      throw Error(ErrorCode::kFormat, "not a version-1 chestprog eval report");
    EvalReport r;
    r.seed = j.at("seed").get<std::uint64_t>();
    r.k = j.at("k").get<int>();
    for (const auto& mj : j.at("models")) {
      ModelReport m;
      m.model = mj.at("model").get<std::string>();
      m.config = mj.at("config");
      for (const auto& fj : mj.at("folds")) {
        FoldResult f;
        f.fold = fj.at("fold").get<int>();
        f.test_ids = fj.at("test_ids").get<std::vector<std::string>>();
        f.labels = fj.at("labels").get<std::vector<int>>();
        f.probabilities = fj.at("probabilities").get<std::vector<double>>();
        f.accuracy.accuracy = fj.at("accuracy").get<double>();
        const auto& c = fj.at("confusion");
        f.accuracy.confusion = {c.at("tp").get<int>(), c.at("tn").get<int>(), c.at("fp").get<int>(), c.at("fn").get<int>()};
        f.roc = roc_from(fj.at("roc"));
        f.fitted_on = fj.at("fitted_on").get<std::vector<std::string>>();
        m.folds.push_back(std::move(f));
      }
      m.accuracy = {mj.at("accuracy").at("mean").get<double>(), mj.at("accuracy").at("std").get<double>()};
      m.auc = {mj.at("auc").at("mean").get<double>(), mj.at("auc").at("std").get<double>()};
      const auto& roc = mj.at("mean_roc");
      m.roc.fpr = roc.at("fpr").get<std::vector<double>>();
      m.roc.mean_tpr = roc.at("mean_tpr").get<std::vector<double>>();
      m.roc.std_tpr = roc.at("std_tpr").get<std::vector<double>>();
      m.auc_vs_chance = ttest_from(mj.at("auc_vs_chance"));
      r.models.push_back(std::move(m));
    }
    for (const auto& cj : j.at("comparisons"))
      r.comparisons.push_back({cj.at("model_a").get<std::string>(), cj.at("model_b").get<std::string>(),
                               cj.at("metric").get<std::string>(), ttest_from(cj.at("test"))});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("malformed eval report: ") + e.what());
  }
}

void write_metrics_csv(const EvalReport& r, const std::filesystem::path& path) {
  auto os = open_out(path);
  os << "model,fold,accuracy,auc\n";
  for (const auto& m : r.models)
    for (const auto& f : m.folds)
      os << m.model << ',' << f.fold + 1 << ',' << format_double(f.accuracy.accuracy) << ',' << format_double(f.roc.auc)
         << '\n';
}

void write_roc_csv(const EvalReport& r, const std::filesystem::path& path) {
  auto os = open_out(path);
  os << "model,fpr,mean_tpr,std_tpr\n";
  for (const auto& m : r.models)
    for (std::size_t i = 0; i < m.roc.fpr.size(); ++i)
      os << m.model << ',' << format_double(m.roc.fpr[i]) << ',' << format_double(m.roc.mean_tpr[i]) << ','
         << format_double(m.roc.std_tpr[i]) << '\n';
}

void write_predictions_csv(const EvalReport& r, const std::filesystem::path& path) {
  auto os = open_out(path);
  os << "model,fold,study_id,label,probability\n";
  for (const auto& m : r.models)
    for (const auto& f : m.folds)
      for (std::size_t i = 0; i < f.test_ids.size(); ++i)
        os << m.model << ',' << f.fold + 1 << ',' << f.test_ids[i] << ',' << f.labels[i] << ','
           << format_double(f.probabilities[i]) << '\n';
}

std::string summary_text(const EvalReport& r) {
  std::ostringstream os;
  os << r.k << "-fold matched cross-validation, seed " << r.seed << "\n\n";
  std::size_t w = 5;
  for (const auto& m : r.models) w = std::max(w, m.model.size());
  auto pad = [](std::string s, std::size_t n) {
    s.resize(std::max(n, s.size()), ' ');
    return s;
  };
  os << pad("Model", w) << "  " << pad("Accuracy", 15) << "  " << pad("AUC", 15) << "  AUC vs 0.5 (p)\n";
  for (const auto& m : r.models)
    os << pad(m.model, w) << "  " << pad(fixed(m.accuracy.mean) + " +- " + fixed(m.accuracy.std), 15) << "  "
       << pad(fixed(m.auc.mean) + " +- " + fixed(m.auc.std), 15) << "  " << p_text(m.auc_vs_chance) << '\n';
  if (!r.comparisons.empty()) {
    os << "\nPaired t-tests over folds\n";
    for (const auto& c : r.comparisons)
      os << "  " << c.model_a << " vs " << c.model_b << " [" << c.metric << "]: t = "
         << (std::isfinite(c.test.t) ? fixed(c.test.t, 4) : (c.test.t > 0 ? "inf" : "-inf")) << ", p = " << p_text(c.test)
         << '\n';
  }
  os << "\nPer-fold\n";
  for (const auto& m : r.models) {
    os << "  " << m.model << '\n';
    for (const auto& f : m.folds) {
      const auto& c = f.accuracy.confusion;
      os << "    fold " << f.fold + 1 << ": accuracy " << fixed(f.accuracy.accuracy) << ", AUC " << fixed(f.roc.auc)
         << "  (TP " << c.tp << ", TN " << c.tn << ", FP " << c.fp << ", FN " << c.fn << ")\n";
    }
  }
  return os.str();
}

void write_report(const EvalReport& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
  write_metrics_csv(r, dir / "metrics.csv");
  write_roc_csv(r, dir / "roc.csv");
  write_predictions_csv(r, dir / "predictions.csv");
  open_out(dir / "summary.txt") << summary_text(r);
  open_out(dir / "report.json") << to_json(r).dump(1) << '\n';
}

EvalReport read_report(const std::filesystem::path& json_path) {
  std::ifstream is(json_path, std::ios::binary);
  if (!is) throw Error(ErrorCode::kIo, "cannot open " + json_path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, json_path.string() + ": " + e.what());
  }
  return eval_report_from_json(j);
}

}  // namespace chestprog::eval
