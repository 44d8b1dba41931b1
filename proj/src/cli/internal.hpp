#pragma once

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dtl::cli {

using json = nlohmann::ordered_json;

inline constexpr int kConfigVersion = 1;

/// Bad input from the user; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads a versioned config file and merges it over `defaults`. Keys not in
/// `defaults` and values of the wrong JSON type are rejected.
json merge_config_file(const std::filesystem::path& path, const json& defaults,
                       const std::string& command);

void write_snapshot(const json& resolved, const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

/// $DTL_OUTPUT_ROOT, or "dtl-output" under the working directory.
std::filesystem::path output_root();

/// Flags that override config values. Each flag writes the JSON pointer
/// `key` only when given on the command line.
class Overrides {
 public:
  template <class T>
  CLI::Option* option(CLI::App* app, const std::string& flag, const std::string& key,
                      const std::string& help) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(flag, *value, help);
    entries_.push_back({opt, [value, key](json& j) { j[json::json_pointer(key)] = *value; }});
    return opt;
  }

  CLI::Option* flag(CLI::App* app, const std::string& flag, const std::string& key,
                    const std::string& help) {
    auto value = std::make_shared<bool>(false);
    CLI::Option* opt = app->add_flag(flag, *value, help);
    entries_.push_back({opt, [value, key](json& j) { j[json::json_pointer(key)] = *value; }});
    return opt;
  }

  void apply(json& j) const {
    for (const auto& e : entries_) {
      if (e.opt->count() > 0) e.set(j);
    }
  }

 private:
  struct Entry {
    CLI::Option* opt;
    std::function<void(json&)> set;
  };
  std::vector<Entry> entries_;
};

// Plotting

enum class Figure { acc_vs_kl, model_comparison };

Figure parse_figure(const std::string& name);

struct PlotFilter {
  std::vector<std::string> algorithms;
  std::vector<std::size_t> target_sizes;
  std::vector<std::string> schedules;
};

/// Renders an SVG from results CSV text. Throws UsageError for missing
/// columns or when the filter leaves no rows.
std::string render_plot(const std::string& csv, Figure figure, const PlotFilter& filter);

}  // namespace dtl::cli
