#pragma once

// Naive-Bayes ground-truth distributions: a class variable z with s states and
// n categorical features, each depending only on z.

#include "dtl/autodiff.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dtl {

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tolerance for prior and CPT rows summing to one.
inline constexpr double kProbabilitySumTolerance = 1e-12;

/// Class prior p(z) plus one s x r_i row-stochastic table p(x_i | z) per
/// feature. Immutable once constructed; the constructor validates.
class NaiveBayesModel {
 public:
  // cpts[i][j][k] = p(x_i = k | z = j)
  using Cpt = std::vector<std::vector<double>>;

  NaiveBayesModel(std::vector<double> prior, std::vector<Cpt> cpts);

  std::size_t classes() const { return prior_.size(); }
  std::size_t features() const { return cpts_.size(); }
  const std::vector<int>& arities() const { return arities_; }
  /// Width of the concatenated one-hot encoding, sum of arities.
  std::size_t one_hot_width() const;

  const std::vector<double>& prior() const { return prior_; }
  const std::vector<Cpt>& cpts() const { return cpts_; }
  double cpt(std::size_t feature, std::size_t cls, std::size_t level) const {
    return cpts_[feature][cls][level];
  }

  bool same_structure(const NaiveBayesModel& other) const {
    return classes() == other.classes() && arities_ == other.arities_;
  }

  friend bool operator==(const NaiveBayesModel& a, const NaiveBayesModel& b) {
    return a.prior_ == b.prior_ && a.cpts_ == b.cpts_;
  }

 private:
  std::vector<double> prior_;
  std::vector<Cpt> cpts_;
  std::vector<int> arities_;
};

struct Provenance {
  std::string model_id;
  std::uint64_t seed = 0;
  std::size_t size = 0;
};

/// Integer-coded categorical samples, row-major, with optional labels.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<int> arities, std::size_t rows, std::vector<int> cells,
          std::optional<std::vector<int>> labels = std::nullopt, Provenance provenance = {});

  std::size_t rows() const { return rows_; }
  std::size_t features() const { return arities_.size(); }
  const std::vector<int>& arities() const { return arities_; }
  int cell(std::size_t row, std::size_t feature) const {
    return cells_[row * arities_.size() + feature];
  }
  std::span<const int> row(std::size_t r) const {
    return {cells_.data() + r * arities_.size(), arities_.size()};
  }
  const std::vector<int>& cells() const { return cells_; }

  bool labeled() const { return labels_.has_value(); }
  /// Throws DataError if the dataset has no labels.
  const std::vector<int>& labels() const;
  const Provenance& provenance() const { return provenance_; }

  /// First `count` rows (labels kept).
  Dataset head(std::size_t count) const;
  /// Same cells without labels.
  Dataset without_labels() const;

 private:
  std::vector<int> arities_;
  std::size_t rows_ = 0;
  std::vector<int> cells_;
  std::optional<std::vector<int>> labels_;
  Provenance provenance_;
};

/// Seeded synthetic stand-in for a target model: prior ~ Dirichlet(5), each
/// CPT row ~ Dirichlet(1), floored at 1e-4 and renormalized.
NaiveBayesModel default_target_model(int binary_features = 64, int classes = 4,
                                     std::uint64_t seed = 0);

inline constexpr double kCptFloor = 1e-4;

/// Forward sampling: z ~ p(z), then each x_i ~ p(x_i | z).
Dataset sample(const NaiveBayesModel& model, std::size_t count, std::uint64_t seed,
               std::string model_id = "");

/// argmax_j log p(z=j) + sum_i log p(x_i | z=j); ties go to the lowest j.
int bayes_predict(const NaiveBayesModel& model, std::span<const int> row);
double bayes_optimal_accuracy(const NaiveBayesModel& model_true, const Dataset& test);

/// Concatenated per-feature one-hot blocks, width sum(arities).
Tensor one_hot(const Dataset& data, std::span<const int> arities);
inline Tensor one_hot(const Dataset& data) { return one_hot(data, data.arities()); }

// Model file: JSON {version, s, arities, prior, cpts}.
inline constexpr int kModelFileVersion = 1;
std::string model_to_json(const NaiveBayesModel& model);
NaiveBayesModel model_from_json(const std::string& text);
void save_model(const NaiveBayesModel& model, const std::filesystem::path& path);
NaiveBayesModel load_model(const std::filesystem::path& path);

// Dataset file: CSV with header x0,...,x{n-1}[,label]. Arities are not stored;
// pass them in, or let them be inferred as max+1 per column (at least 2).
void save_dataset_csv(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset_csv(const std::filesystem::path& path,
                         std::optional<std::vector<int>> arities = std::nullopt);

}  // namespace dtl
