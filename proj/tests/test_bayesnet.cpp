#include "dtl/bayesnet.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

namespace dtl {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "dtl-tests";
  fs::create_directories(dir);
  return dir / name;
}

NaiveBayesModel toy() {
  // Two classes, one binary and one ternary feature.
  return NaiveBayesModel({0.3, 0.7}, {{{0.9, 0.1}, {0.2, 0.8}}, {{0.5, 0.25, 0.25}, {0.1, 0.1, 0.8}}});
}

TEST(Model, ValidationNamesTheRow) {
  try {
    NaiveBayesModel({0.5, 0.5}, {{{0.5, 0.5}, {0.5, 0.3}}});
    FAIL() << "expected ModelError";
  } catch (const ModelError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("feature 0"), std::string::npos) << msg;
    EXPECT_NE(msg.find("row 1"), std::string::npos) << msg;
  }
  EXPECT_THROW(NaiveBayesModel({0.5, 0.6}, {{{0.5, 0.5}, {0.5, 0.5}}}), ModelError);
  EXPECT_THROW(NaiveBayesModel({0.5, 0.5}, {{{1.0, 0.0}, {0.5, 0.5}}}), ModelError);
  EXPECT_THROW(NaiveBayesModel({0.5, 0.5}, {{{0.5, 0.5}}}), ModelError);
}

TEST(Model, Accessors) {
  const auto m = toy();
  EXPECT_EQ(m.classes(), 2u);
  EXPECT_EQ(m.features(), 2u);
  EXPECT_EQ(m.arities(), (std::vector<int>{2, 3}));
  EXPECT_EQ(m.one_hot_width(), 5u);
  EXPECT_EQ(m.cpt(1, 1, 2), 0.8);
}

TEST(DefaultTarget, ShapeFloorAndDeterminism) {
  const auto m = default_target_model();
  EXPECT_EQ(m.one_hot_width(), 128u);
  EXPECT_EQ(m.classes(), 4u);
  for (std::size_t i = 0; i < m.features(); ++i) {
    for (std::size_t j = 0; j < m.classes(); ++j) {
      double total = 0;
      for (std::size_t k = 0; k < 2; ++k) {
        EXPECT_GE(m.cpt(i, j, k), kCptFloor);
        total += m.cpt(i, j, k);
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
  EXPECT_EQ(default_target_model(64, 4, 0), m);
  EXPECT_FALSE(default_target_model(64, 4, 1) == m);
}

TEST(Sample, Deterministic) {
  const auto m = default_target_model(8, 3, 2);
  const Dataset a = sample(m, 500, 7);
  const Dataset b = sample(m, 500, 7);
  EXPECT_EQ(a.cells(), b.cells());
  EXPECT_EQ(a.labels(), b.labels());
  EXPECT_NE(a.cells(), sample(m, 500, 8).cells());
  EXPECT_EQ(sample(m, 1, 3).rows(), 1u);
}

TEST(Sample, FrequenciesWithinThreeStandardErrors) {
  const auto m = toy();
  const std::size_t n = 100000;
  const Dataset d = sample(m, n, 42);
  std::vector<double> class_count(2, 0.0);
  std::vector<std::vector<std::vector<double>>> cell_count(
      2, std::vector<std::vector<double>>(2, std::vector<double>(3, 0.0)));
  for (std::size_t r = 0; r < n; ++r) {
    const int z = d.labels()[r];
    class_count[z] += 1;
    for (std::size_t i = 0; i < 2; ++i) cell_count[i][z][d.cell(r, i)] += 1;
  }
  for (std::size_t j = 0; j < 2; ++j) {
    const double p = m.prior()[j];
    EXPECT_LE(std::abs(class_count[j] / n - p), 3 * std::sqrt(p * (1 - p) / n)) << "class " << j;
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t k = 0; k < static_cast<std::size_t>(m.arities()[i]); ++k) {
        const double q = m.cpt(i, j, k);
        const double nj = class_count[j];
        EXPECT_LE(std::abs(cell_count[i][j][k] / nj - q), 3 * std::sqrt(q * (1 - q) / nj))
            << "feature " << i << " class " << j << " level " << k;
      }
    }
  }
}

TEST(Sample, RowsIndependentOfSubsampling) {
  // Statistics of even and odd rows agree within sampling noise.
  const auto m = default_target_model(4, 2, 5);
  const Dataset d = sample(m, 40000, 9);
  double even = 0, odd = 0;
  for (std::size_t r = 0; r < d.rows(); ++r) (r % 2 ? odd : even) += d.labels()[r];
  const double pe = even / 20000, po = odd / 20000;
  EXPECT_LE(std::abs(pe - po), 4 * std::sqrt(2 * 0.25 / 20000));
}

// Enumerates the joint p(z, x) directly.
int enumerate_predict(const NaiveBayesModel& m, std::span<const int> row) {
  int best = 0;
  double best_p = -1;
  for (std::size_t j = 0; j < m.classes(); ++j) {
    double p = m.prior()[j];
    for (std::size_t i = 0; i < row.size(); ++i) p *= m.cpt(i, j, static_cast<std::size_t>(row[i]));
    if (p > best_p) {
      best_p = p;
      best = static_cast<int>(j);
    }
  }
  return best;
}

TEST(Bayes, MatchesEnumerationOnToyModel) {
  const NaiveBayesModel m({0.2, 0.5, 0.3}, {{{0.7, 0.3}, {0.4, 0.6}, {0.1, 0.9}},
                                            {{0.5, 0.5}, {0.8, 0.2}, {0.35, 0.65}},
                                            {{0.15, 0.85}, {0.6, 0.4}, {0.45, 0.55}}});
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      for (int c = 0; c < 2; ++c) {
        const std::vector<int> row{a, b, c};
        EXPECT_EQ(bayes_predict(m, row), enumerate_predict(m, row));
      }
    }
  }
  const Dataset test = sample(m, 2000, 1);
  double hits = 0;
  for (std::size_t r = 0; r < test.rows(); ++r) hits += enumerate_predict(m, test.row(r)) == test.labels()[r];
  EXPECT_EQ(bayes_optimal_accuracy(m, test), hits / 2000);
}

TEST(Bayes, SeparableAndUninformativeModels) {
  std::vector<NaiveBayesModel::Cpt> sharp, flat;
  for (int i = 0; i < 6; ++i) {
    sharp.push_back({{0.999, 0.001}, {0.001, 0.999}});
    flat.push_back({{0.5, 0.5}, {0.5, 0.5}});
  }
  const NaiveBayesModel s({0.5, 0.5}, sharp);
  EXPECT_GE(bayes_optimal_accuracy(s, sample(s, 2000, 3)), 0.999);
  const NaiveBayesModel f({0.3, 0.7}, flat);
  EXPECT_NEAR(bayes_optimal_accuracy(f, sample(f, 20000, 3)), 0.7, 0.015);
  // All posteriors tie at the prior for the symmetric case: class 0 wins.
  const NaiveBayesModel tie({0.5, 0.5}, flat);
  EXPECT_EQ(bayes_predict(tie, std::vector<int>(6, 1)), 0);
}

TEST(OneHot, Blocks) {
  const Dataset d({2, 3}, 2, {1, 0, 0, 2});
  const Tensor x = one_hot(d);
  EXPECT_EQ(x, Tensor::from_rows({{0, 1, 1, 0, 0}, {1, 0, 0, 0, 1}}));
  EXPECT_EQ(one_hot(sample(default_target_model(), 3, 0)).cols(), 128u);
  const Tensor wide = one_hot(sample(default_target_model(10, 2, 0), 20, 0));
  for (std::size_t r = 0; r < 20; ++r) EXPECT_EQ(wide.matrix().row(r).sum(), 10.0);
  EXPECT_THROW(one_hot(d, std::vector<int>{2, 2}), std::exception);
}

TEST(DatasetType, Validation) {
  EXPECT_THROW(Dataset({2, 2}, 1, {0, 2}), DataError);
  EXPECT_THROW(Dataset({2}, 2, {0, 1}, std::vector<int>{0}), DataError);
  const Dataset u({2}, 2, {0, 1});
  EXPECT_FALSE(u.labeled());
  EXPECT_THROW(u.labels(), DataError);
}

TEST(ModelFile, RoundTripExact) {
  const auto m = default_target_model(16, 4, 3);
  const auto path = scratch("model.json");
  save_model(m, path);
  EXPECT_EQ(load_model(path), m);
  EXPECT_EQ(model_from_json(model_to_json(toy())), toy());
}

TEST(ModelFile, Errors) {
  auto j = model_to_json(toy());
  const auto bad_row = j;
  EXPECT_THROW(model_from_json(R"({"version":1,"s":2,"arities":[2],"prior":[0.5,0.5],"cpts":[[[0.5,0.3],[0.5,0.5]]]})"),
               ModelError);
  try {
    model_from_json(R"({"version":1,"s":2,"arities":[2],"prior":[0.5,0.5],"cpts":[[[0.5,0.3],[0.5,0.5]]]})");
  } catch (const ModelError& e) {
    EXPECT_NE(std::string(e.what()).find("feature 0 row 0"), std::string::npos) << e.what();
  }
  EXPECT_THROW(model_from_json(R"({"version":2,"s":2,"arities":[2],"prior":[0.5,0.5],"cpts":[[[0.5,0.5],[0.5,0.5]]]})"),
               std::exception);
  EXPECT_THROW(model_from_json("{not json"), std::exception);
  EXPECT_THROW(load_model(scratch("does-not-exist.json")), std::exception);
}

TEST(DatasetFile, RoundTrip) {
  const auto m = toy();
  const Dataset d = sample(m, 50, 4);
  const auto path = scratch("data.csv");
  save_dataset_csv(d, path);
  const Dataset back = load_dataset_csv(path, m.arities());
  EXPECT_EQ(back.cells(), d.cells());
  EXPECT_EQ(back.labels(), d.labels());
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "x0,x1,label");

  save_dataset_csv(d.without_labels(), path);
  EXPECT_FALSE(load_dataset_csv(path).labeled());
}

}  // namespace
}  // namespace dtl
