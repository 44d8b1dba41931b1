#pragma once

// Experiment sweeps over perturbation strength x target size x algorithm x
// lambda schedule x replicate, with deterministic per-cell seeds and
// canonical CSV output.

#include "dtl/divergence.hpp"
#include "dtl/nn.hpp"
#include "dtl/transfer.hpp"

#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dtl {

/// One learning strategy in a sweep.
struct Algorithm {
  enum class Kind { source, target, dann, dann_target, mcd, finetune };

  Kind kind = Kind::source;
  FreezeStrategy strategy = FreezeStrategy::retrain_all();

  /// source, target, dann, dann_target, mcd, finetune_all, finetune_last<k>,
  /// finetune_freeze<k>.
  static Algorithm parse(std::string_view name);
  std::string name() const;
  bool uses_lambda() const { return kind == Kind::dann || kind == Kind::dann_target || kind == Kind::mcd; }
};

/// Either a model file or the parameters of default_target_model.
struct TargetModelRef {
  std::optional<std::filesystem::path> path;
  int features = 64;
  int classes = 4;
  std::uint64_t seed = 0;

  NaiveBayesModel load() const;
};

inline const std::vector<double> kDefaultSigmas = {0.01, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6,
                                                   0.7,  0.8, 0.9, 1.0, 1.5, 1.8, 2.0};
inline const std::vector<std::size_t> kDefaultTargetSizes = {50, 100, 200, 400, 800, 2000, 10000};

struct SweepConfig {
  TargetModelRef target;
  std::vector<double> sigmas = kDefaultSigmas;
  std::vector<std::size_t> target_sizes = kDefaultTargetSizes;
  std::size_t source_size = 10000;
  std::size_t test_size = 10000;
  std::vector<std::string> algorithms = {"source",       "target",         "dann",
                                         "dann_target",  "mcd",            "finetune_all",
                                         "finetune_last1", "finetune_last2", "finetune_last3"};
  std::vector<LambdaSchedule> schedules = {LambdaSchedule::fixed(1.0)};
  std::size_t replicates = 5;
  std::uint64_t base_seed = 0;
  /// The seed field is ignored; every cell derives its own.
  TrainConfig train;
  std::size_t mcd_generator_steps = 4;
  McdInference mcd_inference = McdInference::classifier1;
  bool label_relu_before_softmax = true;
  /// When false train_seconds is written as 0 so output bytes are reproducible.
  bool record_timing = false;

  void validate() const;
};

inline constexpr int kSweepConfigVersion = 1;

/// Versioned JSON; every field optional, unknown keys rejected.
std::string sweep_config_to_json(const SweepConfig& cfg);
SweepConfig sweep_config_from_json(const std::string& text);
/// 16 hex digits of FNV-1a over the canonical JSON.
std::string config_hash(const SweepConfig& cfg);

/// Tag standing in for an axis a cell does not depend on.
inline constexpr std::uint64_t kUnusedAxis = ~std::uint64_t{0};

/// derive_seed(base, {sigma index, size index, fnv1a(algorithm), replicate}).
std::uint64_t cell_seed(std::uint64_t base, std::uint64_t sigma_index, std::uint64_t size_index,
                        std::string_view algorithm, std::uint64_t replicate);

struct SweepRow {
  double sigma = 0.0;
  double kl = 0.0;
  std::size_t target_size = 0;
  std::string algorithm;
  std::string lambda_schedule;
  double lambda_resolved = 0.0;
  std::size_t seed = 0;
  double test_accuracy = 0.0;
  double train_seconds = 0.0;
  std::string status = "ok";

  bool ok() const { return status == "ok"; }
};

struct SweepResult {
  std::vector<SweepRow> rows;
  bool all_ok() const;
};

struct SweepOptions {
  std::size_t workers = 1;
  /// When set, the target model and every source model are written here.
  std::optional<std::filesystem::path> model_dir;
  /// Called with one line per finished cell; may be called from workers.
  std::function<void(const std::string&)> progress;
};

std::size_t cell_count(const SweepConfig& cfg);

/// Runs the grid. A cell that throws produces a row with an error status;
/// the rest of the sweep continues. Rows come back in canonical order.
SweepResult run_sweep(const SweepConfig& cfg, const SweepOptions& options = {});

/// Source model file name used for (sigma index, replicate) in model_dir.
std::string source_model_filename(std::size_t sigma_index, std::size_t replicate);

inline constexpr std::string_view kResultsHeader =
    "sigma,kl,target_size,algorithm,lambda_schedule,lambda_resolved,seed,test_accuracy,"
    "train_seconds,status";

std::string results_to_csv(const SweepResult& result);
SweepResult results_from_csv(const std::string& text);
void save_results(const SweepResult& result, const std::filesystem::path& path);
SweepResult load_results(const std::filesystem::path& path);

struct SummaryKey {
  std::optional<double> sigma;
  std::optional<std::size_t> target_size;
  std::optional<std::string> algorithm;
  std::optional<std::string> lambda_schedule;

  auto operator<=>(const SummaryKey&) const = default;
};

struct SummaryRow {
  SummaryKey key;
  std::size_t count = 0;
  double mean_kl = 0.0;
  double mean_accuracy = 0.0;
  /// Sample standard deviation over the group; 0 for a single row.
  double std_accuracy = 0.0;
};

/// Groups successful rows by any of "sigma", "target_size", "algorithm",
/// "lambda_schedule"; sorted by key.
std::vector<SummaryRow> summarize(const SweepResult& result, std::span<const std::string> group_by);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

/// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace dtl
