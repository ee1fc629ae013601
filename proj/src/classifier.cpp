#include "chestprog/classifier.hpp"

#include <fstream>

namespace chestprog::classify {

using nlohmann::json;

std::string_view to_string(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::kLsvm: return "lsvm";
    case ClassifierKind::kNlsvm: return "nlsvm";
    case ClassifierKind::kRf: return "rf";
  }
  return "?";
}

std::optional<ClassifierKind> parse_classifier(std::string_view name) {
  if (name == "lsvm") return ClassifierKind::kLsvm;
  if (name == "nlsvm") return ClassifierKind::kNlsvm;
  if (name == "rf") return ClassifierKind::kRf;
  return std::nullopt;
}

bool wants_standardization(ClassifierKind kind) { return kind != ClassifierKind::kRf; }

TrainedClassifier train_classifier(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, const ClassifierParams& p) {
  TrainedClassifier out;
  out.kind = p.kind;
  out.input_dim = static_cast<std::size_t>(x.cols());
  if (p.kind == ClassifierKind::kRf) {
    out.model = rf_train(x, y, p.forest);
    return out;
  }
  SvmParams sp;
  sp.c = p.c;
  sp.tolerance = p.svm_tolerance;
  sp.kernel = p.kind == ClassifierKind::kLsvm ? Kernel{KernelKind::kLinear, 0.0} : rbf_kernel(p.rbf_width, p.rbf_form);
  out.model = svm_train(x, (2 * y.array() - 1).cast<double>().matrix(), sp);
  return out;
}

double classify(const TrainedClassifier& model, const Eigen::Ref<const Eigen::VectorXd>& row) {
  if (static_cast<std::size_t>(row.size()) != model.input_dim) {
    throw Error(ErrorCode::kDimensionMismatch, "classifier expects " + std::to_string(model.input_dim) +
                                                   " inputs, got " + std::to_string(row.size()));
  }
  return std::visit([&](const auto& m) { return m.probability(row); }, model.model);
}

json to_json(const TrainedClassifier& c) {
  json j = {{"kind", to_string(c.kind)}, {"input_dim", c.input_dim}};
  if (const auto* svm = std::get_if<SvmModel>(&c.model)) j["svm"] = to_json(*svm);
  if (const auto* rf = std::get_if<ForestModel>(&c.model)) j["forest"] = to_json(*rf);
  return j;
}

TrainedClassifier classifier_from_json(const json& j) {
  TrainedClassifier c;
  auto kind = parse_classifier(j.at("kind").get<std::string>());
  if (!kind) throw Error(ErrorCode::kFormat, "unknown classifier kind");
  c.kind = *kind;
  c.input_dim = j.at("input_dim");
  if (c.kind == ClassifierKind::kRf) {
    c.model = forest_from_json(j.at("forest"));
  } else {
    c.model = svm_from_json(j.at("svm"));
  }
  return c;
}

std::vector<double> predict(const RadiomicsModel& model, const FeatureTable& table) {
  if (table.catalog_version != model.catalog_version) {
    throw Error(ErrorCode::kCatalogMismatch, "model was trained on catalog " + model.catalog_version +
                                                 ", table carries " + table.catalog_version);
  }
  if (table.column_names() != model.feature_names) {
    throw Error(ErrorCode::kCatalogMismatch, "feature columns differ from the model's");
  }
  const Eigen::MatrixXd reduced = reduce::reduce_apply(model.reduction, table.values());
  std::vector<double> out;
  out.reserve(table.rows());
  for (Eigen::Index r = 0; r < reduced.rows(); ++r) out.push_back(classify(model.classifier, reduced.row(r).transpose()));
  return out;
}

json to_json(const RadiomicsModel& m) {
  return {{"format", "chestprog-model"},
          {"version", 1},
          {"catalog_version", m.catalog_version},
          {"feature_names", m.feature_names},
          {"reduction", reduce::to_json(m.reduction)},
          {"classifier", to_json(m.classifier)}};
}

RadiomicsModel radiomics_model_from_json(const json& j) {
  if (j.value("format", "") != "chestprog-model" || j.value("version", 0) != 1) {
    throw Error(ErrorCode::kFormat, "not a version-1 chestprog model");
  }
  RadiomicsModel m;
  m.catalog_version = j.at("catalog_version");
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  m.reduction = reduce::reduction_from_json(j.at("reduction"));
  m.classifier = classifier_from_json(j.at("classifier"));
  return m;
}

void write_model(const RadiomicsModel& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << to_json(m).dump() << '\n';
}

RadiomicsModel read_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return radiomics_model_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, path.string() + ": " + e.what());
  }
}

}  // namespace chestprog::classify
