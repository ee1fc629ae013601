#include "cli.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <variant>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "chestprog/catalog.hpp"
#include "chestprog/classifier.hpp"
#include "chestprog/deepnet.hpp"
#include "chestprog/error.hpp"
#include "chestprog/eval.hpp"
#include "chestprog/manifest.hpp"
#include "chestprog/parallel.hpp"
#include "chestprog/phantom.hpp"
#include "chestprog/reduce.hpp"
#include "chestprog/text_format.hpp"

namespace chestprog::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename T>
T parse_number(const std::string& flag, std::string_view s) {
  T v{};
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw UsageError(flag + ": cannot parse '" + std::string(s) + "'");
  return v;
}

template <typename T>
std::vector<T> parse_list(const std::string& flag, const std::string& s, std::size_t expected = 0) {
  std::vector<T> out;
  std::size_t at = 0;
  while (true) {
    const auto comma = s.find(',', at);
    out.push_back(parse_number<T>(flag, std::string_view(s).substr(at, comma == std::string::npos ? std::string::npos : comma - at)));
    if (comma == std::string::npos) break;
    at = comma + 1;
  }
  if (expected && out.size() != expected)
    throw UsageError(flag + ": expected " + std::to_string(expected) + " comma-separated values, got '" + s + "'");
  return out;
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  os << j.dump(1) << '\n';
  if (!os) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

fs::path echo_path(const fs::path& output) { return fs::path(output.string() + ".config.json"); }

// ---- flag groups ----

struct ClampFlags {
  int hu_min = -1024;
  int hu_max = 3071;
  void add(CLI::App* app) {
    app->add_option("--hu-min", hu_min, "Lower HU clamp applied at ingestion")->capture_default_str();
    app->add_option("--hu-max", hu_max, "Upper HU clamp applied at ingestion")->capture_default_str();
  }
  HuRange range() const {
    if (hu_min >= hu_max) throw UsageError("--hu-min must be below --hu-max");
    return {hu_min, hu_max};
  }
};

struct CatalogFlags {
  int levels = 32;
  int bins = 64;
  int glcm_distance = 1;
  std::string connectivity = "slice8";
  std::string mglszm_levels = "8,16,32,64";
  std::string texture_window;
  void add(CLI::App* app) {
    app->add_option("--levels", levels, "Gray levels for GLCM/GLRLM/GLSZM")->capture_default_str();
    app->add_option("--bins", bins, "Histogram bins for intensity statistics")->capture_default_str();
    app->add_option("--glcm-distance", glcm_distance, "GLCM voxel distance")->capture_default_str();
    app->add_option("--connectivity", connectivity, "GLSZM zones: slice8 or full26")->capture_default_str();
    app->add_option("--mglszm-levels", mglszm_levels, "Comma-separated MGLSZM level counts")->capture_default_str();
    app->add_option("--texture-window", texture_window, "lo,hi HU window for quantization (default per-region min,max)");
  }
  radiomics::CatalogParams params(HuRange clamp) const {
    radiomics::CatalogParams p;
    p.levels = levels;
    p.histogram_bins = bins;
    p.glcm_distance = glcm_distance;
    p.hu_range = clamp;
    if (connectivity == "slice8") p.connectivity = texture::Connectivity::kSlice8;
    else if (connectivity == "full26") p.connectivity = texture::Connectivity::kFull26;
    else throw UsageError("--connectivity must be slice8 or full26");
    p.mglszm_levels = parse_list<int>("--mglszm-levels", mglszm_levels);
    if (!texture_window.empty()) {
      const auto w = parse_list<double>("--texture-window", texture_window, 2);
      p.texture_window = texture::HuWindow{w[0], w[1]};
    }
    return p;
  }
};

struct RadiomicsFlags {
  std::string lambda = "auto";
  std::optional<int> pca_components;
  double pca_variance = 0.95;
  bool no_standardize = false;
  double c = 100.0;
  double rbf_width = 0.01;
  std::string rbf_form = "gamma";
  double svm_tolerance = 1e-4;
  int trees = 900;
  int nodesize = 5;
  int mtry = 3;
  void add(CLI::App* app) {
    app->add_option("--lambda", lambda, "LASSO penalty, or 'auto' for inner cross-validation")->capture_default_str();
    app->add_option("--pca-components", pca_components, "Exact PCA component count");
    app->add_option("--pca-variance", pca_variance, "Explained-variance target when no count is given")->capture_default_str();
    app->add_flag("--no-standardize", no_standardize, "Skip z-scoring before reduction");
    app->add_option("--svm-c", c, "SVM box constraint C")->capture_default_str();
    app->add_option("--rbf-width", rbf_width, "RBF parameter")->capture_default_str();
    app->add_option("--rbf-form", rbf_form, "gamma: exp(-w|d|^2); bandwidth: exp(-|d|^2 / (2 w^2))")->capture_default_str();
    app->add_option("--svm-tolerance", svm_tolerance, "SMO stopping tolerance")->capture_default_str();
    app->add_option("--trees", trees, "Random forest size")->capture_default_str();
    app->add_option("--nodesize", nodesize, "Minimum samples per leaf")->capture_default_str();
    app->add_option("--mtry", mtry, "Candidate features per split")->capture_default_str();
  }
  eval::RadiomicsPipeline pipeline(reduce::ReductionKind red, classify::ClassifierKind cls) const {
    eval::RadiomicsPipeline p;
    p.reduction.kind = red;
    p.reduction.standardize =
        !no_standardize && (red != reduce::ReductionKind::kIdentity || classify::wants_standardization(cls));
    if (lambda != "auto") p.reduction.lambda = parse_number<double>("--lambda", lambda);
    p.reduction.pca.components = pca_components;
    p.reduction.pca.variance_fraction = pca_variance;
    p.classifier.kind = cls;
    p.classifier.c = c;
    p.classifier.rbf_width = rbf_width;
    if (rbf_form == "gamma") p.classifier.rbf_form = classify::RbfForm::kGamma;
    else if (rbf_form == "bandwidth") p.classifier.rbf_form = classify::RbfForm::kBandwidth;
    else throw UsageError("--rbf-form must be gamma or bandwidth");
    p.classifier.svm_tolerance = svm_tolerance;
    p.classifier.forest.n_trees = trees;
    p.classifier.forest.nodesize = nodesize;
    p.classifier.forest.mtry = mtry;
    return p;
  }
};

struct DeepnetFlags {
  std::string input = "32,32,8";
  std::string filters = "50,100,100,100";
  std::string kernel = "5,5,2";
  std::string pool = "2,2,2";
  int fc_units = 6000;
  std::string padding = "same";
  std::string activation = "relu_all";
  double dropout = 0.35;
  int epochs = 120;
  int batch_size = 8;
  double lr_initial = 5e-4;
  double lr_final = 1e-5;
  double rho = 0.9;
  double epsilon = 1e-6;
  void add(CLI::App* app) {
    app->add_option("--net-input", input, "Network input x,y,z (study dims must be multiples)")->capture_default_str();
    app->add_option("--filters", filters, "Filters per conv layer")->capture_default_str();
    app->add_option("--kernel", kernel, "Conv kernel x,y,z")->capture_default_str();
    app->add_option("--pool", pool, "Max-pool window x,y,z")->capture_default_str();
    app->add_option("--fc-units", fc_units, "Fully connected layer width")->capture_default_str();
    app->add_option("--padding", padding, "same or valid")->capture_default_str();
    app->add_option("--activation", activation, "relu_all or relu_first_only")->capture_default_str();
    app->add_option("--dropout", dropout, "Dropout rate on hidden layers")->capture_default_str();
    app->add_option("--epochs", epochs, "Training epochs")->capture_default_str();
    app->add_option("--batch-size", batch_size, "Mini-batch size")->capture_default_str();
    app->add_option("--lr-initial", lr_initial, "Learning rate for epochs 1-10")->capture_default_str();
    app->add_option("--lr-final", lr_final, "Learning rate from epoch 60 on")->capture_default_str();
    app->add_option("--rho", rho, "RMSprop decay")->capture_default_str();
    app->add_option("--epsilon", epsilon, "RMSprop epsilon")->capture_default_str();
  }
  eval::DeepnetPipeline pipeline() const {
    eval::DeepnetPipeline p;
    const auto in = parse_list<int>("--net-input", input, 3);
    p.net.input = {in[0], in[1], in[2]};
    p.net.conv_filters = parse_list<int>("--filters", filters);
    const auto k = parse_list<int>("--kernel", kernel, 3);
    p.net.kernel = {k[0], k[1], k[2]};
    const auto pw = parse_list<int>("--pool", pool, 3);
    p.net.pool = {pw[0], pw[1], pw[2]};
    p.net.fc_units = fc_units;
    if (padding == "same") p.net.padding = deepnet::Padding::kSame;
    else if (padding == "valid") p.net.padding = deepnet::Padding::kValid;
    else throw UsageError("--padding must be same or valid");
    if (activation == "relu_all") p.net.activation = deepnet::ActivationPlan::kReluAll;
    else if (activation == "relu_first_only") p.net.activation = deepnet::ActivationPlan::kReluFirstOnly;
    else throw UsageError("--activation must be relu_all or relu_first_only");
    p.net.dropout = dropout;
    p.train.epochs = epochs;
    p.train.batch_size = batch_size;
    p.train.lr_initial = lr_initial;
    p.train.lr_final = lr_final;
    p.train.rho = rho;
    p.train.epsilon = epsilon;
    try {
      (void)deepnet::layer_shapes(p.net);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    return p;
  }
};

using Pipeline = std::variant<eval::RadiomicsPipeline, eval::DeepnetPipeline>;

/// "deepnet" or "<reduction>+<classifier>", e.g. "lasso+nlsvm".
Pipeline parse_pipeline(const std::string& name, const RadiomicsFlags& rf, const DeepnetFlags& df) {
  if (name == "deepnet") return df.pipeline();
  const auto plus = name.find('+');
  if (plus == std::string::npos) throw UsageError("unknown pipeline '" + name + "' (use deepnet or <reduction>+<classifier>)");
  const auto red = reduce::parse_reduction(name.substr(0, plus));
  const auto cls = classify::parse_classifier(name.substr(plus + 1));
  if (!red || !cls)
    throw UsageError("unknown pipeline '" + name + "' (reductions: identity, lasso, pca; classifiers: lsvm, nlsvm, rf)");
  return rf.pipeline(*red, *cls);
}

json pipeline_echo(const Pipeline& p) {
  if (const auto* d = std::get_if<eval::DeepnetPipeline>(&p))
    return {{"pipeline", "deepnet"}, {"net", deepnet::to_json(d->net)}, {"train", deepnet::to_json(d->train)}};
  const auto& r = std::get<eval::RadiomicsPipeline>(p);
  json j = {{"pipeline", "radiomics"},
            {"reduction", std::string(reduce::to_string(r.reduction.kind))},
            {"standardize", r.reduction.standardize},
            {"lambda", r.reduction.lambda ? json(*r.reduction.lambda) : json("auto")},
            {"pca_components", r.reduction.pca.components ? json(*r.reduction.pca.components) : json(nullptr)},
            {"pca_variance", r.reduction.pca.variance_fraction},
            {"classifier", std::string(classify::to_string(r.classifier.kind))},
            {"svm_c", r.classifier.c},
            {"rbf_width", r.classifier.rbf_width},
            {"rbf_form", r.classifier.rbf_form == classify::RbfForm::kGamma ? "gamma" : "bandwidth"},
            {"svm_tolerance", r.classifier.svm_tolerance},
            {"trees", r.classifier.forest.n_trees},
            {"nodesize", r.classifier.forest.nodesize},
            {"mtry", r.classifier.forest.mtry}};
  return j;
}

Eigen::VectorXi labels_of(const FeatureTable& t) {
  Eigen::VectorXi y(static_cast<Eigen::Index>(t.rows()));
  for (std::size_t i = 0; i < t.rows(); ++i) y(static_cast<Eigen::Index>(i)) = t.studies()[i].label;
  return y;
}

std::vector<StudyRecord> with_labels(const std::vector<StudyRecord>& studies, const std::vector<StudyMeta>& meta) {
  std::vector<StudyRecord> out;
  out.reserve(studies.size());
  for (std::size_t i = 0; i < studies.size(); ++i) {
    const auto& s = studies[i];
    std::vector<AnatomyMask> masks(s.masks().begin(), s.masks().end());
    out.emplace_back(s.id(), s.volume(), std::move(masks), meta[i].label, s.censor_days(), s.match_group());
  }
  return out;
}

std::vector<StudyMeta> metas_of(const std::vector<StudyRecord>& studies) {
  std::vector<StudyMeta> m;
  for (const auto& s : studies) m.push_back(meta_of(s));
  return m;
}

// ---- subcommands ----

struct Context {
  std::uint64_t seed = 0;
  int threads = 1;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;
};

void cmd_phantom(const Context& ctx, int pairs, const std::string& dims_s, const std::string& spacing_s,
                 const fs::path& out_dir) {
  if (pairs < 0) throw UsageError("--pairs must be nonnegative");
  const auto d = parse_list<int>("--dims", dims_s, 3);
  const auto s = parse_list<double>("--spacing", spacing_s, 3);
  const Dims dims{d[0], d[1], d[2]};
  const Spacing spacing{s[0], s[1], s[2]};
  const auto specs = synthio::signal_cohort(pairs, dims, ctx.seed, spacing);
  std::vector<StudyRecord> studies(specs.size());
  parallel_for(specs.size(), ctx.threads, [&](std::size_t i) { studies[i] = synthio::generate_phantom(specs[i]); });
  const auto manifest = synthio::write_cohort(studies, out_dir);
  write_json(out_dir / "config.json", {{"subcommand", "phantom"},
                                       {"pairs", pairs},
                                       {"dims", {dims.x, dims.y, dims.z}},
                                       {"spacing", {spacing.x, spacing.y, spacing.z}},
                                       {"seed", ctx.seed}});
  *ctx.out << "wrote " << studies.size() << " studies to " << manifest.string() << '\n';
}

FeatureTable extract(const Context& ctx, const std::vector<StudyRecord>& studies, const radiomics::CatalogParams& params) {
  const auto catalog = radiomics::default_catalog(params);
  std::vector<std::string> warnings;
  auto table = radiomics::extract_table(studies, catalog, ctx.threads, &warnings);
  for (const auto& w : warnings) *ctx.err << "warning: " << w << '\n';
  return table;
}

void cmd_extract(const Context& ctx, const fs::path& manifest, const CatalogFlags& cf, const ClampFlags& clamp,
                 const fs::path& out_csv) {
  const auto params = cf.params(clamp.range());
  const auto studies = synthio::load_manifest(manifest, clamp.range(), ctx.threads);
  const auto table = extract(ctx, studies, params);
  if (out_csv.has_parent_path()) fs::create_directories(out_csv.parent_path());
  radiomics::write_feature_table(table, out_csv, radiomics::to_json(params));
  write_json(echo_path(out_csv), {{"subcommand", "extract"},
                                  {"manifest", manifest.string()},
                                  {"catalog", radiomics::to_json(params)},
                                  {"catalog_version", table.catalog_version},
                                  {"seed", ctx.seed}});
  *ctx.out << "extracted " << table.rows() << " x " << table.cols() << " features to " << out_csv.string() << '\n';
}

void cmd_reduce(const Context& ctx, const fs::path& features, const std::string& method, const RadiomicsFlags& rf,
                const fs::path& out, const fs::path& table_out) {
  const auto kind = reduce::parse_reduction(method);
  if (!kind) throw UsageError("unknown reduction '" + method + "' (identity, lasso, pca)");
  const auto p = rf.pipeline(*kind, classify::ClassifierKind::kNlsvm);
  const auto table = radiomics::read_feature_table(features);
  std::vector<std::string> ids;
  for (const auto& s : table.studies()) ids.push_back(s.id);
  const auto t = reduce::fit_reduction(table.values(), labels_of(table).cast<double>(), p.reduction, -1, ids);
  write_json(out, reduce::to_json(t));
  if (!table_out.empty()) {
    const Eigen::MatrixXd z = reduce::reduce_apply(t, table.values());
    std::vector<std::string> names;
    for (Eigen::Index c = 0; c < z.cols(); ++c)
      names.push_back(*kind == reduce::ReductionKind::kPca ? "pc" + std::to_string(c + 1)
                      : *kind == reduce::ReductionKind::kLasso
                          ? table.column_names()[static_cast<std::size_t>(t.selected[static_cast<std::size_t>(c)])]
                          : table.column_names()[static_cast<std::size_t>(c)]);
    FeatureTable reduced(names, table.studies(), z);
    reduced.catalog_version = table.catalog_version + "+" + std::string(reduce::to_string(*kind));
    if (table_out.has_parent_path()) fs::create_directories(table_out.parent_path());
    radiomics::write_feature_table(reduced, table_out, reduce::to_json(t));
  }
  auto echo = pipeline_echo(p);
  echo.erase("classifier");
  for (const char* k : {"svm_c", "rbf_width", "rbf_form", "svm_tolerance", "trees", "nodesize", "mtry"}) echo.erase(k);
  echo["subcommand"] = "reduce";
  echo["features"] = features.string();
  echo["seed"] = ctx.seed;
  write_json(echo_path(out), echo);
  *ctx.out << "reduced " << t.input_dim << " -> " << t.output_dim() << " columns\n";
}

void cmd_train(const Context& ctx, const Pipeline& p, const fs::path& features, const fs::path& manifest,
               const ClampFlags& clamp, const fs::path& out) {
  json echo = pipeline_echo(p);
  echo["subcommand"] = "train";
  echo["seed"] = ctx.seed;
  if (const auto* d = std::get_if<eval::DeepnetPipeline>(&p)) {
    if (manifest.empty()) throw UsageError("deepnet training needs --manifest");
    const auto studies = synthio::load_manifest(manifest, clamp.range(), ctx.threads);
    std::vector<deepnet::Sample<float>> samples;
    for (const auto& s : studies) samples.push_back(deepnet::make_sample<float>(s, d->net.input));
    auto cfg = d->train;
    cfg.seed = ctx.seed;
    cfg.threads = ctx.threads;
    const auto result = deepnet::train<float>(d->net, samples, cfg);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    deepnet::write_network<float>(out, result.net, result.optimizer,
                                  {{"train_config", deepnet::to_json(cfg)}, {"epochs_done", result.log.size()}});
    deepnet::write_epoch_log(result.log, fs::path(out.string() + ".log.csv"));
    echo["manifest"] = manifest.string();
    write_json(echo_path(out), echo);
    *ctx.out << "trained deepnet for " << result.log.size() << " epochs, final train accuracy "
             << format_double(result.log.empty() ? 0.0 : result.log.back().train_accuracy) << '\n';
    return;
  }
  if (features.empty()) throw UsageError("radiomics training needs --features");
  const auto& r = std::get<eval::RadiomicsPipeline>(p);
  const auto table = radiomics::read_feature_table(features);
  eval::Fold all;
  for (std::size_t i = 0; i < table.rows(); ++i) all.train.push_back(i);
  const auto model = eval::fit_fold_model(table, all, -1, r, ctx.seed);
  classify::write_model(model, out);
  echo["features"] = features.string();
  write_json(echo_path(out), echo);
  *ctx.out << "trained model on " << table.rows() << " studies, " << model.reduction.output_dim() << " inputs\n";
}

void write_predictions(const fs::path& path, const std::vector<StudyMeta>& meta, const std::vector<double>& p) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  os << "study_id,label,probability\n";
  for (std::size_t i = 0; i < meta.size(); ++i) os << meta[i].id << ',' << meta[i].label << ',' << format_double(p[i]) << '\n';
}

void cmd_predict(const Context& ctx, const fs::path& model, const fs::path& features, const fs::path& manifest,
                 const ClampFlags& clamp, const fs::path& out) {
  std::vector<StudyMeta> meta;
  std::vector<double> probs;
  if (model.extension() == ".cpnet") {
    if (manifest.empty()) throw UsageError("deepnet prediction needs --manifest");
    const auto net = deepnet::read_network<float>(model);
    const auto studies = synthio::load_manifest(manifest, clamp.range(), ctx.threads);
    deepnet::Workspace<float> ws;
    for (const auto& s : studies) {
      meta.push_back(meta_of(s));
      probs.push_back(static_cast<double>(net.forward(deepnet::make_sample<float>(s, net.spec().input).input, ws)[1]));
    }
  } else {
    if (features.empty()) throw UsageError("radiomics prediction needs --features");
    const auto m = classify::read_model(model);
    const auto table = radiomics::read_feature_table(features);
    probs = classify::predict(m, table);
    meta = table.studies();
  }
  write_predictions(out, meta, probs);
  write_json(echo_path(out), {{"subcommand", "predict"}, {"model", model.string()}, {"seed", ctx.seed}});
  *ctx.out << "wrote " << probs.size() << " predictions to " << out.string() << '\n';
}

void cmd_crossval(const Context& ctx, const Pipeline& p, const fs::path& features, const fs::path& manifest,
                  const CatalogFlags& cf, const ClampFlags& clamp, int folds, std::optional<std::uint64_t> permute,
                  const std::string& name_flag, const fs::path& out_dir) {
  json echo = pipeline_echo(p);
  echo["subcommand"] = "crossval";
  echo["seed"] = ctx.seed;
  echo["folds"] = folds;
  echo["permute_labels"] = permute ? json(*permute) : json(nullptr);
  eval::ModelReport rep;
  if (const auto* d = std::get_if<eval::DeepnetPipeline>(&p)) {
    if (manifest.empty()) throw UsageError("deepnet cross-validation needs --manifest");
    auto studies = synthio::load_manifest(manifest, clamp.range(), ctx.threads);
    if (permute) studies = with_labels(studies, eval::permute_labels(metas_of(studies), *permute));
    const auto plan = eval::make_folds(metas_of(studies), folds, ctx.seed);
    std::vector<std::vector<deepnet::EpochLog>> logs;
    rep = eval::crossval_deepnet(studies, plan, *d, name_flag.empty() ? "deepnet" : name_flag, ctx.threads, &logs);
    fs::create_directories(out_dir);
    for (std::size_t f = 0; f < logs.size(); ++f)
      deepnet::write_epoch_log(logs[f], out_dir / ("train_log_fold" + std::to_string(f + 1) + ".csv"));
    echo["manifest"] = manifest.string();
  } else {
    const auto& r = std::get<eval::RadiomicsPipeline>(p);
    FeatureTable table;
    if (!features.empty()) {
      table = radiomics::read_feature_table(features);
      echo["features"] = features.string();
    } else if (!manifest.empty()) {
      const auto params = cf.params(clamp.range());
      table = extract(ctx, synthio::load_manifest(manifest, clamp.range(), ctx.threads), params);
      echo["manifest"] = manifest.string();
      echo["catalog"] = radiomics::to_json(params);
    } else {
      throw UsageError("crossval needs --features or --manifest");
    }
    if (permute) table = eval::permute_labels(table, *permute);
    const auto plan = eval::make_folds(table.studies(), folds, ctx.seed);
    const std::string name = name_flag.empty() ? std::string(reduce::to_string(r.reduction.kind)) + "+" +
                                                     std::string(classify::to_string(r.classifier.kind))
                                               : name_flag;
    rep = eval::crossval_radiomics(table, plan, r, name, ctx.threads);
  }
  std::vector<eval::ModelReport> models;
  models.push_back(std::move(rep));
  const auto report = eval::assemble_report(std::move(models), ctx.seed, folds);
  eval::write_report(report, out_dir);
  write_json(out_dir / "config.json", echo);
  *ctx.out << eval::summary_text(report);
}

void cmd_report(const Context& ctx, const std::vector<fs::path>& inputs, const fs::path& out_dir) {
  std::vector<eval::ModelReport> models;
  std::uint64_t seed = 0;
  int k = 0;
  json sources = json::array();
  for (const auto& in : inputs) {
    auto r = eval::read_report(in);
    if (k == 0) {
      seed = r.seed;
      k = r.k;
    } else if (r.k != k) {
      throw Error(ErrorCode::kInvalidArgument, in.string() + " uses " + std::to_string(r.k) + " folds, expected " +
                                                   std::to_string(k));
    }
    for (auto& m : r.models) models.push_back(std::move(m));
    sources.push_back(in.string());
  }
  const auto report = eval::assemble_report(std::move(models), seed, k);
  eval::write_report(report, out_dir);
  write_json(out_dir / "config.json", {{"subcommand", "report"}, {"inputs", sources}});
  *ctx.out << eval::summary_text(report);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Chest-CT mortality prognostics: phantoms, radiomics, classifiers, 3D ConvNet, cross-validation"};
  app.require_subcommand(1);
  Context ctx;
  ctx.out = &out;
  ctx.err = &err;
  app.add_option("--seed", ctx.seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--threads", ctx.threads, "Worker threads (results do not depend on it)")->capture_default_str();

  ClampFlags clamp;
  CatalogFlags catalog;
  RadiomicsFlags rflags;
  DeepnetFlags dflags;

  int pairs = 24;
  std::string dims = "64,64,16", spacing = "0.7,0.7,5";
  std::string out_dir;
  auto* phantom = app.add_subcommand("phantom", "Generate matched case/control phantoms and a manifest");
  phantom->add_option("--pairs", pairs, "Matched pairs")->capture_default_str();
  phantom->add_option("--dims", dims, "Lattice x,y,z")->capture_default_str();
  phantom->add_option("--spacing", spacing, "Voxel spacing in mm")->capture_default_str();
  phantom->add_option("--out", out_dir, "Output directory")->required();

  std::string manifest, features, out_file, table_out, method = "lasso", pipeline = "lasso+nlsvm", model, name;
  auto* extract_cmd = app.add_subcommand("extract", "Extract the radiomics feature table");
  extract_cmd->add_option("--manifest", manifest, "Study manifest")->required();
  extract_cmd->add_option("--out", out_file, "Feature CSV")->required();
  catalog.add(extract_cmd);
  clamp.add(extract_cmd);

  auto* reduce_cmd = app.add_subcommand("reduce", "Fit a reduction transform on a feature table");
  reduce_cmd->add_option("--features", features, "Feature CSV")->required();
  reduce_cmd->add_option("--method", method, "identity, lasso or pca")->capture_default_str();
  reduce_cmd->add_option("--out", out_file, "Transform JSON")->required();
  reduce_cmd->add_option("--table-out", table_out, "Optional reduced feature CSV");
  rflags.add(reduce_cmd);

  auto* train_cmd = app.add_subcommand("train", "Train one model on all studies");
  train_cmd->add_option("--pipeline", pipeline, "deepnet or <reduction>+<classifier>")->capture_default_str();
  train_cmd->add_option("--features", features, "Feature CSV (radiomics)");
  train_cmd->add_option("--manifest", manifest, "Study manifest (deepnet)");
  train_cmd->add_option("--out", out_file, "Model file (.json, or .cpnet for deepnet)")->required();
  rflags.add(train_cmd);
  dflags.add(train_cmd);
  clamp.add(train_cmd);

  auto* predict_cmd = app.add_subcommand("predict", "Score studies with a trained model");
  predict_cmd->add_option("--model", model, "Model file")->required();
  predict_cmd->add_option("--features", features, "Feature CSV (radiomics)");
  predict_cmd->add_option("--manifest", manifest, "Study manifest (deepnet)");
  predict_cmd->add_option("--out", out_file, "Predictions CSV")->required();
  clamp.add(predict_cmd);

  int folds = 6;
  std::optional<std::uint64_t> permute;
  auto* cv_cmd = app.add_subcommand("crossval", "Matched k-fold cross-validation");
  cv_cmd->add_option("--pipeline", pipeline, "deepnet or <reduction>+<classifier>")->capture_default_str();
  cv_cmd->add_option("--features", features, "Feature CSV (radiomics)");
  cv_cmd->add_option("--manifest", manifest, "Study manifest (deepnet, or radiomics with extraction)");
  cv_cmd->add_option("--folds", folds, "Fold count")->capture_default_str();
  cv_cmd->add_option("--permute-labels", permute, "Swap labels within pairs using this seed (null experiment)");
  cv_cmd->add_option("--name", name, "Model name in the report");
  cv_cmd->add_option("--out", out_dir, "Report directory")->required();
  rflags.add(cv_cmd);
  dflags.add(cv_cmd);
  catalog.add(cv_cmd);
  clamp.add(cv_cmd);

  std::vector<std::string> inputs;
  auto* report_cmd = app.add_subcommand("report", "Re-render stored reports and compare models");
  report_cmd->add_option("--in", inputs, "report.json files")->required();
  report_cmd->add_option("--out", out_dir, "Output directory")->required();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (ctx.threads < 1) throw UsageError("--threads must be at least 1");
    if (phantom->parsed()) cmd_phantom(ctx, pairs, dims, spacing, out_dir);
    else if (extract_cmd->parsed()) cmd_extract(ctx, manifest, catalog, clamp, out_file);
    else if (reduce_cmd->parsed()) cmd_reduce(ctx, features, method, rflags, out_file, table_out);
    else if (train_cmd->parsed())
      cmd_train(ctx, parse_pipeline(pipeline, rflags, dflags), features, manifest, clamp, out_file);
    else if (predict_cmd->parsed()) cmd_predict(ctx, model, features, manifest, clamp, out_file);
    else if (cv_cmd->parsed())
      cmd_crossval(ctx, parse_pipeline(pipeline, rflags, dflags), features, manifest, catalog, clamp, folds, permute,
                   name, out_dir);
    else if (report_cmd->parsed()) {
      std::vector<fs::path> paths(inputs.begin(), inputs.end());
      cmd_report(ctx, paths, out_dir);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace chestprog::cli
