#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "chestprog/forest.hpp"
#include "chestprog/reduce.hpp"
#include "chestprog/svm.hpp"
#include "chestprog/volume.hpp"

namespace chestprog::classify {

enum class ClassifierKind { kLsvm, kNlsvm, kRf };

std::string_view to_string(ClassifierKind kind);
std::optional<ClassifierKind> parse_classifier(std::string_view name);

struct ClassifierParams {
  ClassifierKind kind = ClassifierKind::kNlsvm;
  double c = 100.0;
  double rbf_width = 0.01;
  RbfForm rbf_form = RbfForm::kGamma;
  double svm_tolerance = 1e-4;
  ForestParams forest;
};

/// A classifier g(x) in [0, 1] over reduced rows.
struct TrainedClassifier {
  ClassifierKind kind = ClassifierKind::kNlsvm;
  std::size_t input_dim = 0;
  std::variant<SvmModel, ForestModel> model;
};

/// `y` holds 0/1 labels; SVMs see them as -1/+1.
TrainedClassifier train_classifier(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, const ClassifierParams& p);

/// Confidence for class 1. Throws on a dimension mismatch.
double classify(const TrainedClassifier& model, const Eigen::Ref<const Eigen::VectorXd>& row);

nlohmann::json to_json(const TrainedClassifier& c);
TrainedClassifier classifier_from_json(const nlohmann::json& j);

/// Default reduction for a classifier: forests consume unstandardized features.
bool wants_standardization(ClassifierKind kind);

/// Reduction + classifier fitted on the same rows, tagged with the feature catalog.
struct RadiomicsModel {
  std::string catalog_version;
  std::vector<std::string> feature_names;
  reduce::ReductionTransform reduction;
  TrainedClassifier classifier;
};

/// Probabilities for every row of `table`. Refuses tables from another catalog version.
std::vector<double> predict(const RadiomicsModel& model, const FeatureTable& table);

// Model file: JSON { "format": "chestprog-model", "version": 1, "catalog_version",
// "feature_names", "reduction", "classifier" }.
nlohmann::json to_json(const RadiomicsModel& m);
RadiomicsModel radiomics_model_from_json(const nlohmann::json& j);
void write_model(const RadiomicsModel& m, const std::filesystem::path& path);
RadiomicsModel read_model(const std::filesystem::path& path);

}  // namespace chestprog::classify
