#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "chestprog/classifier.hpp"
#include "chestprog/deepnet.hpp"
#include "chestprog/reduce.hpp"
#include "chestprog/volume.hpp"

namespace chestprog::eval {

// ---- metrics ----

struct Confusion {
  int tp = 0;
  int tn = 0;
  int fp = 0;
  int fn = 0;
  bool operator==(const Confusion&) const = default;
};

struct AccuracyResult {
  double accuracy = 0.0;
  Confusion confusion;
};

/// (TP + TN) / n with `probability >= threshold` predicting class 1.
AccuracyResult accuracy(std::span<const double> probabilities, std::span<const int> labels, double threshold = 0.5);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  bool operator==(const RocPoint&) const = default;
};

struct RocCurve {
  std::vector<RocPoint> points;  // (0,0) first, (1,1) last
  double auc = 0.0;
};

/// Sweeps thresholds over the unique scores, high to low, tied scores entering together.
RocCurve roc_and_auc(std::span<const double> scores, std::span<const int> labels);

/// TPR at `fpr`, linear between points. Where the curve is vertical at `fpr` the top is taken.
double tpr_at(const RocCurve& curve, double fpr);

std::vector<double> default_fpr_grid();  // 0, 0.01, ..., 1

struct AveragedRoc {
  std::vector<double> fpr;
  std::vector<double> mean_tpr;
  std::vector<double> std_tpr;  // population standard deviation across curves
};

AveragedRoc average_roc(std::span<const RocCurve> curves, std::span<const double> grid);

struct TTest {
  double t = 0.0;  // +-infinity when degenerate with a nonzero mean
  double p = 1.0;  // two-sided
  int dof = 0;
  bool degenerate = false;  // zero variance
  std::string description;
};

TTest paired_ttest(std::span<const double> a, std::span<const double> b);
TTest one_sample_ttest(std::span<const double> x, double mu0 = 0.5);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
};
MeanStd mean_std(std::span<const double> x);

// ---- folds ----

struct Fold {
  std::vector<std::size_t> train;  // row positions, ascending
  std::vector<std::size_t> test;
};

struct FoldPlan {
  int k = 6;
  std::uint64_t seed = 0;
  std::vector<Fold> folds;
};

/// Match groups (each exactly one case and one control) are shuffled by `seed` and dealt
/// round-robin into k folds. Throws on an unmatched cohort or when k does not divide the
/// number of pairs.
FoldPlan make_folds(std::span<const StudyMeta> studies, int k = 6, std::uint64_t seed = 0);

/// Swaps the two labels of each matched pair with probability 1/2 (a pair-preserving null).
std::vector<StudyMeta> permute_labels(std::span<const StudyMeta> studies, std::uint64_t seed);
FeatureTable permute_labels(const FeatureTable& table, std::uint64_t seed);

// ---- cross-validation ----

struct RadiomicsPipeline {
  reduce::ReductionOptions reduction;
  classify::ClassifierParams classifier;
};

struct DeepnetPipeline {
  deepnet::NetworkSpec net;
  deepnet::TrainConfig train;
};

struct FoldResult {
  int fold = 0;
  std::vector<std::string> test_ids;
  std::vector<int> labels;
  std::vector<double> probabilities;
  AccuracyResult accuracy;
  RocCurve roc;
  std::vector<std::string> fitted_on;  // audit trail: ids every fitted parameter saw
};

struct ModelReport {
  std::string model;
  std::vector<FoldResult> folds;
  MeanStd accuracy;
  MeanStd auc;
  AveragedRoc roc;
  TTest auc_vs_chance;  // one-sample test of per-fold AUC against 0.5
  nlohmann::json config;
};

struct Comparison {
  std::string model_a;
  std::string model_b;
  std::string metric;  // "accuracy" or "auc"
  TTest test;
};

struct EvalReport {
  std::uint64_t seed = 0;
  int k = 6;
  std::vector<ModelReport> models;
  std::vector<Comparison> comparisons;
};

/// Derives a per-fold seed so folds stay independent of execution order.
std::uint64_t fold_seed(std::uint64_t seed, int fold);

/// Reduction and classifier fitted on the fold's training rows only.
classify::RadiomicsModel fit_fold_model(const FeatureTable& table, const Fold& fold, int fold_index,
                                        const RadiomicsPipeline& pipeline, std::uint64_t seed);

ModelReport crossval_radiomics(const FeatureTable& table, const FoldPlan& plan, const RadiomicsPipeline& pipeline,
                               const std::string& name, int threads = 1);

ModelReport crossval_deepnet(const std::vector<StudyRecord>& studies, const FoldPlan& plan,
                             const DeepnetPipeline& pipeline, const std::string& name, int threads = 1,
                             std::vector<std::vector<deepnet::EpochLog>>* logs = nullptr);

/// Builds the fold plan from the table and runs one radiomics pipeline.
EvalReport run_crossval(const FeatureTable& table, const RadiomicsPipeline& pipeline, const std::string& name,
                        std::uint64_t seed, int k = 6, int threads = 1);

/// Paired t-tests on per-fold accuracy and AUC for every pair of models.
EvalReport assemble_report(std::vector<ModelReport> models, std::uint64_t seed, int k);

// ---- report files ----

nlohmann::json to_json(const EvalReport& r);
EvalReport eval_report_from_json(const nlohmann::json& j);

void write_metrics_csv(const EvalReport& r, const std::filesystem::path& path);      // model,fold,accuracy,auc
void write_roc_csv(const EvalReport& r, const std::filesystem::path& path);          // model,fpr,mean_tpr,std_tpr
void write_predictions_csv(const EvalReport& r, const std::filesystem::path& path);  // model,fold,study_id,label,probability
std::string summary_text(const EvalReport& r);

/// metrics.csv, roc.csv, predictions.csv, summary.txt and report.json under `dir`.
void write_report(const EvalReport& r, const std::filesystem::path& dir);
EvalReport read_report(const std::filesystem::path& json_path);

}  // namespace chestprog::eval
