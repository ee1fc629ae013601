#include <algorithm>
#include <set>

#include "chestprog/error.hpp"
#include "chestprog/eval.hpp"
#include "chestprog/parallel.hpp"

namespace chestprog::eval {

std::uint64_t fold_seed(std::uint64_t seed, int fold) {
  // splitmix64 finalizer over (seed, fold)
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(fold + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

namespace {

std::vector<std::string> ids_of(const FeatureTable& t) {
  std::vector<std::string> ids;
  for (const auto& s : t.studies()) ids.push_back(s.id);
  return ids;
}

/// The audit trail must not mention any test study.
void audit(const std::vector<std::string>& fitted_on, const std::vector<std::string>& test_ids, int fold) {
  const std::set<std::string> seen(fitted_on.begin(), fitted_on.end());
  for (const auto& id : test_ids)
    if (seen.count(id))
      throw Error(ErrorCode::kInvalidArgument,
                  "fold " + std::to_string(fold + 1) + ": test study '" + id + "' reached a fitted parameter");
}

FoldResult score_fold(int fold, std::vector<std::string> test_ids, std::vector<int> labels, std::vector<double> probs,
                      std::vector<std::string> fitted_on) {
  FoldResult r;
  r.fold = fold;
  r.accuracy = accuracy(probs, labels);
  r.roc = roc_and_auc(probs, labels);
  r.test_ids = std::move(test_ids);
  r.labels = std::move(labels);
  r.probabilities = std::move(probs);
  r.fitted_on = std::move(fitted_on);
  audit(r.fitted_on, r.test_ids, fold);
  return r;
}

void summarize(ModelReport& m) {
  std::vector<double> acc, auc;
  std::vector<RocCurve> curves;
  for (const auto& f : m.folds) {
    acc.push_back(f.accuracy.accuracy);
    auc.push_back(f.roc.auc);
    curves.push_back(f.roc);
  }
  m.accuracy = mean_std(acc);
  m.auc = mean_std(auc);
  const auto grid = default_fpr_grid();
  m.roc = average_roc(curves, grid);
  m.auc_vs_chance = one_sample_ttest(auc, 0.5);
}

nlohmann::json pipeline_json(const RadiomicsPipeline& p) {
  const auto& r = p.reduction;
  nlohmann::json red = {{"kind", std::string(reduce::to_string(r.kind))}, {"standardize", r.standardize}};
  if (r.lambda) red["lambda"] = *r.lambda;
  else red["lambda"] = "auto";
  red["lasso_cv_folds"] = r.lasso_cv.folds;
  red["lasso_cv_grid"] = r.lasso_cv.grid_size;
  red["lasso_cv_min_ratio"] = r.lasso_cv.min_ratio;
  red["lasso_tolerance"] = r.lasso.tolerance;
  red["lasso_max_sweeps"] = r.lasso.max_sweeps;
  red["pca_components"] = r.pca.components ? nlohmann::json(*r.pca.components) : nlohmann::json(nullptr);
  red["pca_variance"] = r.pca.variance_fraction;
  const auto& c = p.classifier;
  nlohmann::json cls = {{"kind", std::string(classify::to_string(c.kind))},
                        {"c", c.c},
                        {"rbf_width", c.rbf_width},
                        {"rbf_form", c.rbf_form == classify::RbfForm::kGamma ? "gamma" : "bandwidth"},
                        {"svm_tolerance", c.svm_tolerance},
                        {"trees", c.forest.n_trees},
                        {"nodesize", c.forest.nodesize},
                        {"mtry", c.forest.mtry}};
  return {{"pipeline", "radiomics"}, {"reduction", red}, {"classifier", cls}};
}

}  // namespace

classify::RadiomicsModel fit_fold_model(const FeatureTable& table, const Fold& fold, int fold_index,
                                        const RadiomicsPipeline& pipeline, std::uint64_t seed) {
  const FeatureTable train = table.select_rows(fold.train);
  const auto ids = ids_of(train);
  Eigen::VectorXd y(static_cast<Eigen::Index>(train.rows()));
  Eigen::VectorXi yi(y.size());
  for (std::size_t i = 0; i < train.rows(); ++i) {
    yi(static_cast<Eigen::Index>(i)) = train.studies()[i].label;
    y(static_cast<Eigen::Index>(i)) = train.studies()[i].label;
  }
  classify::RadiomicsModel m;
  m.catalog_version = table.catalog_version;
  m.feature_names = table.column_names();
  m.reduction = reduce::fit_reduction(train.values(), y, pipeline.reduction, fold_index, ids);
  const Eigen::MatrixXd z = reduce::reduce_apply(m.reduction, train.values());
  auto params = pipeline.classifier;
  params.forest.seed = fold_seed(seed, fold_index);
  params.forest.threads = 1;
  m.classifier = classify::train_classifier(z, yi, params);
  return m;
}

ModelReport crossval_radiomics(const FeatureTable& table, const FoldPlan& plan, const RadiomicsPipeline& pipeline,
                               const std::string& name, int threads) {
  ModelReport rep;
  rep.model = name;
  rep.config = pipeline_json(pipeline);
  rep.folds.resize(plan.folds.size());
  parallel_for(plan.folds.size(), threads, [&](std::size_t f) {
    const int fi = static_cast<int>(f);
    try {
      const auto model = fit_fold_model(table, plan.folds[f], fi, pipeline, plan.seed);
      const FeatureTable test = table.select_rows(plan.folds[f].test);
      auto probs = classify::predict(model, test);
      std::vector<int> labels;
      for (const auto& s : test.studies()) labels.push_back(s.label);
      rep.folds[f] = score_fold(fi, ids_of(test), std::move(labels), std::move(probs), model.reduction.fitted_on);
    } catch (const Error& e) {
      throw Error(e.code(), name + ", fold " + std::to_string(f + 1) + ": " + e.what());
    }
  });
  summarize(rep);
  return rep;
}

ModelReport crossval_deepnet(const std::vector<StudyRecord>& studies, const FoldPlan& plan,
                             const DeepnetPipeline& pipeline, const std::string& name, int threads,
                             std::vector<std::vector<deepnet::EpochLog>>* logs) {
  ModelReport rep;
  rep.model = name;
  rep.config = {{"pipeline", "deepnet"}, {"net", deepnet::to_json(pipeline.net)}, {"train", deepnet::to_json(pipeline.train)}};
  std::vector<deepnet::Sample<float>> samples;
  samples.reserve(studies.size());
  for (const auto& s : studies) samples.push_back(deepnet::make_sample<float>(s, pipeline.net.input));
  if (logs) logs->clear();
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    const int fi = static_cast<int>(f);
    try {
      std::vector<deepnet::Sample<float>> train;
      std::vector<std::string> fitted_on;
      for (auto r : plan.folds[f].train) {
        train.push_back(samples[r]);
        fitted_on.push_back(samples[r].id);
      }
      auto cfg = pipeline.train;
      cfg.seed = fold_seed(plan.seed, fi);
      cfg.threads = threads;
      const auto result = deepnet::train<float>(pipeline.net, train, cfg);
      if (logs) logs->push_back(result.log);
      std::vector<std::string> ids;
      std::vector<int> labels;
      std::vector<double> probs;
      deepnet::Workspace<float> ws;
      for (auto r : plan.folds[f].test) {
        ids.push_back(samples[r].id);
        labels.push_back(samples[r].label);
        probs.push_back(static_cast<double>(result.net.forward(samples[r].input, ws)[1]));
      }
      rep.folds.push_back(score_fold(fi, std::move(ids), std::move(labels), std::move(probs), std::move(fitted_on)));
    } catch (const Error& e) {
      throw Error(e.code(), name + ", fold " + std::to_string(f + 1) + ": " + e.what());
    }
  }
  summarize(rep);
  return rep;
}

EvalReport assemble_report(std::vector<ModelReport> models, std::uint64_t seed, int k) {
  EvalReport r;
  r.seed = seed;
  r.k = k;
  r.models = std::move(models);
  for (std::size_t a = 0; a < r.models.size(); ++a)
    for (std::size_t b = a + 1; b < r.models.size(); ++b) {
      const auto& ma = r.models[a];
      const auto& mb = r.models[b];
      if (ma.folds.size() != mb.folds.size() || ma.folds.size() < 2) continue;
      std::vector<double> acc_a, acc_b, auc_a, auc_b;
      for (std::size_t f = 0; f < ma.folds.size(); ++f) {
        acc_a.push_back(ma.folds[f].accuracy.accuracy);
        acc_b.push_back(mb.folds[f].accuracy.accuracy);
        auc_a.push_back(ma.folds[f].roc.auc);
        auc_b.push_back(mb.folds[f].roc.auc);
      }
      r.comparisons.push_back({ma.model, mb.model, "accuracy", paired_ttest(acc_a, acc_b)});
      r.comparisons.push_back({ma.model, mb.model, "auc", paired_ttest(auc_a, auc_b)});
    }
  return r;
}

EvalReport run_crossval(const FeatureTable& table, const RadiomicsPipeline& pipeline, const std::string& name,
                        std::uint64_t seed, int k, int threads) {
  const auto plan = make_folds(table.studies(), k, seed);
  std::vector<ModelReport> models;
  models.push_back(crossval_radiomics(table, plan, pipeline, name, threads));
  return assemble_report(std::move(models), seed, k);
}

}  // namespace chestprog::eval
