#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using chestprog::cli::run_cli;
using chestprog::testkit::TempDir;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = slurp(e.path());
  return files;
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

// Small cohort shared by several tests: 6 pairs at 32x32x8.
class CliCohort : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("cli");
    const auto r = cli({"--seed", "3", "phantom", "--pairs", "6", "--dims", "32,32,8", "--out", (*dir_ / "ph").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto e = cli({"extract", "--manifest", (*dir_ / "ph/manifest.json").string(), "--out",
                        (*dir_ / "f.csv").string()});
    ASSERT_EQ(e.code, 0) << e.err;
  }
  static void TearDownTestSuite() { delete dir_; }
  static fs::path path(const std::string& s) { return *dir_ / s; }
  static TempDir* dir_;
};
TempDir* CliCohort::dir_ = nullptr;

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli({"frobnicate"}).code, 2);
  EXPECT_EQ(cli({"phantom"}).code, 2);
  EXPECT_EQ(cli({"--threads", "0", "phantom", "--out", "/tmp/unused-chestprog"}).code, 2);
  const auto r = cli({"crossval", "--pipeline", "lasso+knn", "--features", "x.csv", "--out", "/tmp/unused-chestprog"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("knn"), std::string::npos) << r.err;
  EXPECT_EQ(cli({"train", "--pipeline", "deepnet+rf", "--features", "x.csv", "--out", "m.json"}).code, 2);
}

TEST(Cli, HelpExitsZero) {
  const auto r = cli({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("crossval"), std::string::npos);
}

TEST(Cli, PhantomZeroPairs) {
  TempDir d("zero");
  const auto r = cli({"phantom", "--pairs", "0", "--out", (d / "ph").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = nlohmann::json::parse(slurp(d / "ph/manifest.json"));
  EXPECT_TRUE(m.at("studies").empty());
}

TEST(Cli, PhantomTreeIsReproducible) {
  TempDir d("repro");
  for (auto sub : {"a", "b"})
    ASSERT_EQ(cli({"--seed", "8", "phantom", "--pairs", "2", "--dims", "32,32,8", "--out", (d / sub).string()}).code, 0);
  const auto a = tree(d / "a"), b = tree(d / "b");
  EXPECT_EQ(a.size(), 2u + 4u * 8u);
  EXPECT_EQ(a, b);
}

TEST(Cli, MissingManifestIsRuntimeFailure) {
  TempDir d("nomanifest");
  const auto r = cli({"extract", "--manifest", (d / "nope.json").string(), "--out", (d / "f.csv").string()});
  EXPECT_EQ(r.code, 1);
}

TEST_F(CliCohort, ExtractShapeAndRerun) {
  const auto csv = slurp(path("f.csv"));
  EXPECT_EQ(lines(csv), 13u);
  EXPECT_EQ(csv.rfind("study_id,", 0), 0u);
  const auto r = cli({"--threads", "3", "extract", "--manifest", path("ph/manifest.json").string(), "--out",
                      path("f3.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(path("f3.csv")), csv);
  EXPECT_EQ(slurp(path("f3.csv.meta.json")), slurp(path("f.csv.meta.json")));
  const auto cfg = nlohmann::json::parse(slurp(path("f.csv.config.json")));
  EXPECT_FALSE(cfg.contains("threads"));
}

TEST_F(CliCohort, CorruptVolumeNamesStudy) {
  TempDir d("corrupt");
  fs::copy(path("ph"), d / "ph", fs::copy_options::recursive);
  const auto vol = d / "ph/pair003_control/volume.cpv";
  const auto bytes = slurp(vol);
  std::ofstream(vol, std::ios::binary | std::ios::trunc) << bytes.substr(0, bytes.size() - 100);
  const auto r = cli({"extract", "--manifest", (d / "ph/manifest.json").string(), "--out", (d / "f.csv").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("pair003_control"), std::string::npos) << r.err;
}

TEST_F(CliCohort, RadiomicsCrossvalReport) {
  const auto out = path("cv");
  const auto r = cli({"--seed", "1", "crossval", "--pipeline", "lasso+nlsvm", "--features", path("f.csv").string(),
                      "--folds", "3", "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto metrics = slurp(out / "metrics.csv");
  EXPECT_EQ(metrics.rfind("model,fold,accuracy,auc\n", 0), 0u);
  EXPECT_EQ(lines(metrics), 4u);
  EXPECT_EQ(lines(slurp(out / "roc.csv")), 102u);
  EXPECT_EQ(lines(slurp(out / "predictions.csv")), 13u);
  EXPECT_FALSE(slurp(out / "summary.txt").empty());
  const auto threaded = path("cv4");
  ASSERT_EQ(cli({"--seed", "1", "--threads", "4", "crossval", "--pipeline", "lasso+nlsvm", "--features",
                 path("f.csv").string(), "--folds", "3", "--out", threaded.string()})
                .code,
            0);
  EXPECT_EQ(tree(out), tree(threaded));
}

TEST_F(CliCohort, FoldCountMustDividePairs) {
  const auto r = cli({"crossval", "--features", path("f.csv").string(), "--folds", "4", "--out", path("cvbad").string()});
  EXPECT_EQ(r.code, 1);
}

TEST_F(CliCohort, ReduceTrainPredict) {
  ASSERT_EQ(cli({"reduce", "--features", path("f.csv").string(), "--method", "pca", "--pca-components", "3", "--out",
                 path("pca.json").string(), "--table-out", path("pca.csv").string()})
                .code,
            0);
  EXPECT_EQ(nlohmann::json::parse(slurp(path("pca.json"))).at("kind"), "pca");
  EXPECT_EQ(slurp(path("pca.csv")).substr(0, slurp(path("pca.csv")).find('\n')).find("study_id"), 0u);
  const auto t = cli({"train", "--pipeline", "pca+rf", "--pca-components", "3", "--trees", "30", "--features",
                      path("f.csv").string(), "--out", path("rf.json").string()});
  ASSERT_EQ(t.code, 0) << t.err;
  const auto p = cli({"predict", "--model", path("rf.json").string(), "--features", path("f.csv").string(), "--out",
                      path("pred.csv").string()});
  ASSERT_EQ(p.code, 0) << p.err;
  EXPECT_EQ(lines(slurp(path("pred.csv"))), 13u);
}

TEST_F(CliCohort, DeepnetCrossvalAndReportMerge) {
  const auto out = path("dn");
  const auto r = cli({"--seed", "2", "crossval", "--pipeline", "deepnet", "--manifest", path("ph/manifest.json").string(),
                      "--net-input", "16,16,4", "--filters", "2,2", "--fc-units", "8", "--epochs", "2", "--folds", "3",
                      "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(slurp(out / "metrics.csv")), 4u);
  for (int f = 1; f <= 3; ++f) EXPECT_TRUE(fs::exists(out / ("train_log_fold" + std::to_string(f) + ".csv"))) << f;
  ASSERT_EQ(cli({"--seed", "2", "crossval", "--pipeline", "identity+lsvm", "--features", path("f.csv").string(),
                 "--folds", "3", "--out", path("lin").string()})
                .code,
            0);
  const auto merged = path("merged");
  const auto m = cli({"report", "--in", (out / "report.json").string(), (path("lin") / "report.json").string(), "--out",
                      merged.string()});
  ASSERT_EQ(m.code, 0) << m.err;
  const auto rep = nlohmann::json::parse(slurp(merged / "report.json"));
  EXPECT_EQ(rep.at("models").size(), 2u);
  EXPECT_EQ(rep.at("comparisons").size(), 2u);
}
