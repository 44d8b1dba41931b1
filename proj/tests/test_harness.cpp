#include "dtl/harness.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

namespace dtl {
namespace {

namespace fs = std::filesystem;

SweepConfig tiny() {
  SweepConfig cfg;
  cfg.target.features = 6;
  cfg.target.classes = 2;
  cfg.sigmas = {0.5, 1.0};
  cfg.target_sizes = {20, 40};
  cfg.source_size = 96;
  cfg.test_size = 64;
  cfg.algorithms = {"source", "target", "dann", "finetune_last1"};
  cfg.schedules = {LambdaSchedule::fixed(1.0), LambdaSchedule::kl_direct()};
  cfg.replicates = 2;
  cfg.train.epochs = 1;
  cfg.train.batch_size = 16;
  return cfg;
}

TEST(Algorithms, ParseAndName) {
  for (const char* name : {"source", "target", "dann", "dann_target", "mcd", "finetune_all",
                           "finetune_last2", "finetune_freeze1"}) {
    EXPECT_EQ(Algorithm::parse(name).name(), name);
  }
  EXPECT_EQ(Algorithm::parse("finetune_last3").strategy.k(), 3u);
  EXPECT_TRUE(Algorithm::parse("mcd").uses_lambda());
  EXPECT_FALSE(Algorithm::parse("finetune_all").uses_lambda());
  EXPECT_THROW(Algorithm::parse("finetune_lastx"), std::invalid_argument);
  EXPECT_THROW(Algorithm::parse("cnn"), std::invalid_argument);
}

TEST(Config, CellCount) {
  SweepConfig one;
  one.sigmas = {1.0};
  one.target_sizes = {50};
  one.algorithms = {"dann"};
  one.replicates = 1;
  EXPECT_EQ(cell_count(one), 1u);
  // 2 sigmas x 2 sizes x 2 replicates x (source + target + 2 dann schedules + finetune)
  EXPECT_EQ(cell_count(tiny()), 2u * 2 * 2 * 5);
}

TEST(Config, JsonRoundTripAndHash) {
  const SweepConfig cfg = tiny();
  const std::string text = sweep_config_to_json(cfg);
  const SweepConfig back = sweep_config_from_json(text);
  EXPECT_EQ(sweep_config_to_json(back), text);
  EXPECT_EQ(config_hash(back), config_hash(cfg));
  EXPECT_EQ(config_hash(cfg).size(), 16u);
  SweepConfig other = cfg;
  other.base_seed = 1;
  EXPECT_NE(config_hash(other), config_hash(cfg));
}

TEST(Config, Rejections) {
  EXPECT_THROW(sweep_config_from_json(R"({"version":1,"sigmas":[1],"bogus":2})"), std::invalid_argument);
  EXPECT_THROW(sweep_config_from_json(R"({"sigmas":[1]})"), std::invalid_argument);
  EXPECT_THROW(sweep_config_from_json(R"({"version":1,"algorithms":["dann","dann"]})"), std::invalid_argument);
  EXPECT_THROW(sweep_config_from_json(R"({"version":1,"sigmas":[-1]})"), std::invalid_argument);
  EXPECT_NO_THROW(sweep_config_from_json(R"({"version":1})"));
}

TEST(Seeds, CellSeedsDistinct) {
  const auto a = cell_seed(0, 0, 0, "dann", 0);
  EXPECT_EQ(a, cell_seed(0, 0, 0, "dann", 0));
  EXPECT_NE(a, cell_seed(0, 1, 0, "dann", 0));
  EXPECT_NE(a, cell_seed(0, 0, 1, "dann", 0));
  EXPECT_NE(a, cell_seed(0, 0, 0, "mcd", 0));
  EXPECT_NE(a, cell_seed(0, 0, 0, "dann", 1));
  EXPECT_NE(a, cell_seed(1, 0, 0, "dann", 0));
}

class TinySweep : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    model_dir = fs::temp_directory_path() / "dtl-tests" / "sweep-models";
    fs::remove_all(model_dir);
    SweepOptions opts;
    opts.model_dir = model_dir;
    result = new SweepResult(run_sweep(tiny(), opts));
  }
  static void TearDownTestSuite() { delete result; }
  static inline SweepResult* result = nullptr;
  static inline fs::path model_dir;
};

TEST_F(TinySweep, RowsComplete) {
  ASSERT_EQ(result->rows.size(), cell_count(tiny()));
  EXPECT_TRUE(result->all_ok());
  for (const auto& row : result->rows) {
    EXPECT_GE(row.test_accuracy, 0.0);
    EXPECT_LE(row.test_accuracy, 1.0);
    EXPECT_EQ(row.train_seconds, 0.0);
    if (Algorithm::parse(row.algorithm).uses_lambda()) {
      EXPECT_NE(row.lambda_schedule, "none");
    } else {
      EXPECT_EQ(row.lambda_schedule, "none");
      EXPECT_EQ(row.lambda_resolved, 0.0);
    }
    if (row.lambda_schedule == "kl") {
      EXPECT_EQ(row.lambda_resolved, row.kl);
    }
  }
}

TEST_F(TinySweep, KlMatchesSavedModels) {
  const auto cfg = tiny();
  const NaiveBayesModel target = load_model(model_dir / "target.json");
  EXPECT_EQ(target, cfg.target.load());
  for (const auto& row : result->rows) {
    const std::size_t si = row.sigma == 0.5 ? 0 : 1;
    bool matched = false;
    for (std::size_t rep = 0; rep < cfg.replicates; ++rep) {
      const auto source = load_model(model_dir / source_model_filename(si, rep));
      if (std::abs(kl_factorized(source, target) - row.kl) <= 1e-12) matched = true;
    }
    EXPECT_TRUE(matched) << row.sigma << " " << row.kl;
  }
}

TEST_F(TinySweep, SameBytesWithMoreWorkers) {
  SweepOptions opts;
  opts.workers = 3;
  EXPECT_EQ(results_to_csv(run_sweep(tiny(), opts)), results_to_csv(*result));
}

TEST_F(TinySweep, CanonicalOrder) {
  for (std::size_t i = 1; i < result->rows.size(); ++i) {
    const auto& a = result->rows[i - 1];
    const auto& b = result->rows[i];
    EXPECT_LE(std::tie(a.sigma, a.target_size), std::tie(b.sigma, b.target_size));
  }
}

TEST_F(TinySweep, CsvRoundTrip) {
  const std::string csv = results_to_csv(*result);
  EXPECT_EQ(csv.substr(0, kResultsHeader.size()), kResultsHeader);
  EXPECT_EQ(results_to_csv(results_from_csv(csv)), csv);
  const auto path = fs::temp_directory_path() / "dtl-tests" / "results.csv";
  save_results(*result, path);
  EXPECT_EQ(results_to_csv(load_results(path)), csv);
  EXPECT_THROW(results_from_csv("a,b\n"), std::exception);
}

TEST(Summary, MeanAndSampleStd) {
  SweepResult r;
  for (double acc : {0.6, 0.7, 0.8}) {
    SweepRow row;
    row.sigma = 1.0;
    row.kl = 0.5;
    row.target_size = 50;
    row.algorithm = "dann";
    row.test_accuracy = acc;
    r.rows.push_back(row);
  }
  SweepRow failed = r.rows.front();
  failed.status = "error: boom";
  failed.test_accuracy = std::nan("");
  r.rows.push_back(failed);
  SweepRow other = r.rows.front();
  other.algorithm = "mcd";
  r.rows.push_back(other);

  const std::vector<std::string> by{"algorithm"};
  const auto s = summarize(r, by);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(*s[0].key.algorithm, "dann");
  EXPECT_EQ(s[0].count, 3u);
  EXPECT_NEAR(s[0].mean_accuracy, 0.7, 1e-12);
  EXPECT_NEAR(s[0].std_accuracy, 0.1, 1e-12);
  EXPECT_EQ(s[1].std_accuracy, 0.0);
  EXPECT_FALSE(s[0].key.sigma.has_value());

  const std::vector<std::string> bad{"colour"};
  EXPECT_THROW(summarize(r, bad), std::invalid_argument);
  EXPECT_THROW(summarize(SweepResult{}, by), std::exception);
}

TEST(Spearman, Examples) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  EXPECT_NEAR(spearman(x, std::vector<double>{2, 4, 6, 8, 10}), 1.0, 1e-12);
  EXPECT_NEAR(spearman(x, std::vector<double>{5, 4, 3, 2, 1}), -1.0, 1e-12);
  EXPECT_NEAR(spearman(x, std::vector<double>{1, 8, 27, 64, 125}), 1.0, 1e-12);
  // Ties take average ranks: y ranks 1.5 1.5 3 4 5, Pearson 9.5 / sqrt(10 * 9.5).
  EXPECT_NEAR(spearman(x, std::vector<double>{1, 1, 3, 4, 5}), std::sqrt(0.95), 1e-12);
  EXPECT_EQ(spearman(x, std::vector<double>{3, 3, 3, 3, 3}), 0.0);
  EXPECT_THROW(spearman(x, std::vector<double>{1, 2}), std::invalid_argument);
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(2.0), "2");
  EXPECT_EQ(format_double(std::nan("")), "nan");
  const double v = 0.1 + 0.2;
  EXPECT_EQ(std::stod(format_double(v)), v);
}

}  // namespace
}  // namespace dtl
