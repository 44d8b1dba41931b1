#include "dtl/harness.hpp"

#include "dtl/random.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

namespace dtl {

namespace {

using json = nlohmann::ordered_json;

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || item.key() == a;
    if (!known) throw std::invalid_argument("unknown key '" + item.key() + "' in " + where);
  }
}

std::string inference_name(McdInference m) {
  switch (m) {
    case McdInference::classifier1:
      return "classifier1";
    case McdInference::classifier2:
      return "classifier2";
    case McdInference::average:
      return "average";
  }
  return "";
}

McdInference parse_inference(const std::string& s) {
  if (s == "classifier1") return McdInference::classifier1;
  if (s == "classifier2") return McdInference::classifier2;
  if (s == "average") return McdInference::average;
  throw std::invalid_argument("unknown MCD inference '" + s + "'");
}

std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

double parse_double(std::string_view s) {
  if (s.empty() || s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("bad number '" + std::string(s) + "' in results");
  }
  return v;
}

std::size_t parse_size(std::string_view s) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("bad integer '" + std::string(s) + "' in results");
  }
  return v;
}

// Runs jobs on up to `workers` threads. Each job writes only its own slot.
void run_pool(std::vector<std::function<void()>>& jobs, std::size_t workers) {
  workers = std::max<std::size_t>(1, std::min(workers, jobs.size()));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) jobs[i]();
  };
  if (workers == 1) {
    worker();
    return;
  }
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

// ---------------------------------------------------------------------------
// Algorithms and config

Algorithm Algorithm::parse(std::string_view name) {
  Algorithm a;
  auto suffix = [&](std::string_view prefix) -> std::optional<std::size_t> {
    if (!name.starts_with(prefix)) return std::nullopt;
    std::string_view rest = name.substr(prefix.size());
    std::size_t k = 0;
    auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), k);
    if (rest.empty() || ec != std::errc() || ptr != rest.data() + rest.size()) {
      throw std::invalid_argument("bad layer count in algorithm '" + std::string(name) + "'");
    }
    return k;
  };
  if (name == "source") {
    a.kind = Kind::source;
  } else if (name == "target") {
    a.kind = Kind::target;
  } else if (name == "dann") {
    a.kind = Kind::dann;
  } else if (name == "dann_target") {
    a.kind = Kind::dann_target;
  } else if (name == "mcd") {
    a.kind = Kind::mcd;
  } else if (name == "finetune_all") {
    a.kind = Kind::finetune;
    a.strategy = FreezeStrategy::retrain_all();
  } else if (auto k = suffix("finetune_last")) {
    a.kind = Kind::finetune;
    a.strategy = FreezeStrategy::retrain_last(*k);
  } else if (auto k2 = suffix("finetune_freeze")) {
    a.kind = Kind::finetune;
    a.strategy = FreezeStrategy::freeze_first(*k2);
  } else {
    throw std::invalid_argument("unknown algorithm '" + std::string(name) + "'");
  }
  return a;
}

std::string Algorithm::name() const {
  switch (kind) {
    case Kind::source:
      return "source";
    case Kind::target:
      return "target";
    case Kind::dann:
      return "dann";
    case Kind::dann_target:
      return "dann_target";
    case Kind::mcd:
      return "mcd";
    case Kind::finetune:
      break;
  }
  switch (strategy.kind()) {
    case FreezeStrategy::Kind::retrain_all:
      return "finetune_all";
    case FreezeStrategy::Kind::retrain_last_k:
      return "finetune_last" + std::to_string(strategy.k());
    case FreezeStrategy::Kind::freeze_first_k:
      return "finetune_freeze" + std::to_string(strategy.k());
  }
  return "";
}

NaiveBayesModel TargetModelRef::load() const {
  if (path) return load_model(*path);
  return default_target_model(features, classes, seed);
}

void SweepConfig::validate() const {
  if (sigmas.empty()) throw std::invalid_argument("sweep needs at least one sigma");
  for (double s : sigmas) {
    if (!(s >= 0.0)) throw std::invalid_argument("sigma values must be nonnegative");
  }
  if (target_sizes.empty()) throw std::invalid_argument("sweep needs at least one target size");
  for (std::size_t n : target_sizes) {
    if (n < 2) throw std::invalid_argument("target sizes must be at least 2");
  }
  if (source_size < 2) throw std::invalid_argument("source size must be at least 2");
  if (test_size < 1) throw std::invalid_argument("test size must be at least 1");
  if (algorithms.empty()) throw std::invalid_argument("sweep needs at least one algorithm");
  std::set<std::string> seen;
  for (const auto& a : algorithms) {
    const std::string canonical = Algorithm::parse(a).name();
    if (!seen.insert(canonical).second) {
      throw std::invalid_argument("algorithm '" + a + "' listed twice");
    }
  }
  if (schedules.empty()) throw std::invalid_argument("sweep needs at least one lambda schedule");
  if (replicates < 1) throw std::invalid_argument("sweep needs at least one replicate");
  if (target.features < 1 || target.classes < 2) {
    throw std::invalid_argument("target model needs at least one feature and two classes");
  }
  TrainConfig t = train;
  t.validate();
}

std::string sweep_config_to_json(const SweepConfig& cfg) {
  json j;
  j["version"] = kSweepConfigVersion;
  json target;
  if (cfg.target.path) {
    target["path"] = cfg.target.path->string();
  } else {
    target["features"] = cfg.target.features;
    target["classes"] = cfg.target.classes;
    target["seed"] = cfg.target.seed;
  }
  j["target"] = target;
  j["sigmas"] = cfg.sigmas;
  j["target_sizes"] = cfg.target_sizes;
  j["source_size"] = cfg.source_size;
  j["test_size"] = cfg.test_size;
  j["algorithms"] = cfg.algorithms;
  std::vector<std::string> schedules;
  for (const auto& s : cfg.schedules) schedules.push_back(s.to_string());
  j["lambda_schedules"] = schedules;
  j["replicates"] = cfg.replicates;
  j["base_seed"] = cfg.base_seed;
  j["train"] = {{"learning_rate", cfg.train.learning_rate},
                {"momentum", cfg.train.momentum},
                {"batch_size", cfg.train.batch_size},
                {"epochs", cfg.train.epochs}};
  j["mcd"] = {{"generator_steps", cfg.mcd_generator_steps},
              {"inference", inference_name(cfg.mcd_inference)}};
  j["label_relu_before_softmax"] = cfg.label_relu_before_softmax;
  j["record_timing"] = cfg.record_timing;
  return j.dump(2);
}

SweepConfig sweep_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("malformed sweep config: ") + e.what());
  }
  try {
    reject_unknown(j,
                   {"version", "target", "sigmas", "target_sizes", "source_size", "test_size",
                    "algorithms", "lambda_schedules", "replicates", "base_seed", "train", "mcd",
                    "label_relu_before_softmax", "record_timing"},
                   "sweep config");
    if (!j.contains("version")) throw std::invalid_argument("sweep config is missing 'version'");
    const int version = j.at("version").get<int>();
    if (version != kSweepConfigVersion) {
      throw std::invalid_argument("unsupported sweep config version " + std::to_string(version));
    }
    SweepConfig cfg;
    if (j.contains("target")) {
      const json& t = j.at("target");
      reject_unknown(t, {"path", "features", "classes", "seed"}, "target");
      if (t.contains("path")) cfg.target.path = t.at("path").get<std::string>();
      cfg.target.features = t.value("features", cfg.target.features);
      cfg.target.classes = t.value("classes", cfg.target.classes);
      cfg.target.seed = t.value("seed", cfg.target.seed);
    }
    if (j.contains("sigmas")) cfg.sigmas = j.at("sigmas").get<std::vector<double>>();
    if (j.contains("target_sizes")) {
      cfg.target_sizes = j.at("target_sizes").get<std::vector<std::size_t>>();
    }
    cfg.source_size = j.value("source_size", cfg.source_size);
    cfg.test_size = j.value("test_size", cfg.test_size);
    if (j.contains("algorithms")) cfg.algorithms = j.at("algorithms").get<std::vector<std::string>>();
    if (j.contains("lambda_schedules")) {
      cfg.schedules.clear();
      for (const auto& s : j.at("lambda_schedules")) {
        cfg.schedules.push_back(LambdaSchedule::parse(s.get<std::string>()));
      }
    }
    cfg.replicates = j.value("replicates", cfg.replicates);
    cfg.base_seed = j.value("base_seed", cfg.base_seed);
    if (j.contains("train")) {
      const json& t = j.at("train");
      reject_unknown(t, {"learning_rate", "momentum", "batch_size", "epochs"}, "train");
      cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
      cfg.train.momentum = t.value("momentum", cfg.train.momentum);
      cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
      cfg.train.epochs = t.value("epochs", cfg.train.epochs);
    }
    if (j.contains("mcd")) {
      const json& m = j.at("mcd");
      reject_unknown(m, {"generator_steps", "inference"}, "mcd");
      cfg.mcd_generator_steps = m.value("generator_steps", cfg.mcd_generator_steps);
      if (m.contains("inference")) cfg.mcd_inference = parse_inference(m.at("inference").get<std::string>());
    }
    cfg.label_relu_before_softmax =
        j.value("label_relu_before_softmax", cfg.label_relu_before_softmax);
    cfg.record_timing = j.value("record_timing", cfg.record_timing);
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("invalid sweep config: ") + e.what());
  }
}

std::string config_hash(const SweepConfig& cfg) {
  const std::uint64_t h = fnv1a(sweep_config_to_json(cfg));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t cell_seed(std::uint64_t base, std::uint64_t sigma_index, std::uint64_t size_index,
                        std::string_view algorithm, std::uint64_t replicate) {
  return derive_seed(base, {sigma_index, size_index, fnv1a(algorithm), replicate});
}

// ---------------------------------------------------------------------------
// Sweep

bool SweepResult::all_ok() const {
  return std::all_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.ok(); });
}

std::size_t cell_count(const SweepConfig& cfg) {
  std::size_t per_grid = cfg.sigmas.size() * cfg.target_sizes.size() * cfg.replicates;
  std::size_t total = 0;
  for (const auto& a : cfg.algorithms) {
    total += per_grid * (Algorithm::parse(a).uses_lambda() ? cfg.schedules.size() : 1);
  }
  return total;
}

std::string source_model_filename(std::size_t sigma_index, std::size_t replicate) {
  return "source_sigma" + std::to_string(sigma_index) + "_rep" + std::to_string(replicate) + ".json";
}

namespace {

struct ReplicateData {
  Dataset target_pool;  // prefixes give the target training sets
  Dataset test;
};

struct SourceData {
  double kl = 0.0;
  Dataset data;
};

struct Trained {
  std::optional<Network> net;
  std::string error;
  double seconds = 0.0;
};

double elapsed(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

SweepResult run_sweep(const SweepConfig& cfg, const SweepOptions& options) {
  cfg.validate();
  const NaiveBayesModel target = cfg.target.load();
  const std::size_t input = target.one_hot_width();
  const std::size_t classes = target.classes();
  const std::uint64_t base = cfg.base_seed;
  const std::size_t nsig = cfg.sigmas.size();
  const std::size_t nrep = cfg.replicates;
  const std::size_t max_size = *std::max_element(cfg.target_sizes.begin(), cfg.target_sizes.end());

  std::vector<Algorithm> algorithms;
  for (const auto& a : cfg.algorithms) algorithms.push_back(Algorithm::parse(a));
  const bool need_source_net = std::any_of(algorithms.begin(), algorithms.end(), [](const Algorithm& a) {
    return a.kind == Algorithm::Kind::source || a.kind == Algorithm::Kind::finetune;
  });
  const bool need_target_net = std::any_of(algorithms.begin(), algorithms.end(), [](const Algorithm& a) {
    return a.kind == Algorithm::Kind::target;
  });

  if (options.model_dir) {
    std::filesystem::create_directories(*options.model_dir);
    save_model(target, *options.model_dir / "target.json");
  }

  // Data shared across cells: target train/test per replicate, one source
  // model and dataset per (sigma, replicate).
  std::vector<ReplicateData> reps;
  for (std::size_t r = 0; r < nrep; ++r) {
    reps.push_back({sample(target, max_size, derive_seed(base, {fnv1a("target-train"), r}), "target"),
                    sample(target, cfg.test_size, derive_seed(base, {fnv1a("target-test"), r}),
                           "target")});
  }
  std::vector<SourceData> sources(nsig * nrep);
  for (std::size_t si = 0; si < nsig; ++si) {
    for (std::size_t r = 0; r < nrep; ++r) {
      const NaiveBayesModel src = perturb_model(
          target, {cfg.sigmas[si], derive_seed(base, {fnv1a("perturb"), si, r})});
      if (options.model_dir) save_model(src, *options.model_dir / source_model_filename(si, r));
      sources[si * nrep + r] = {
          kl_factorized(src, target),
          sample(src, cfg.source_size, derive_seed(base, {fnv1a("source-data"), si, r}), "source")};
    }
  }

  std::mutex progress_mutex;
  auto report = [&](const std::string& line) {
    if (!options.progress) return;
    std::lock_guard lock(progress_mutex);
    options.progress(line);
  };

  const NetworkSpec backbone = presets::backbone(input, classes, cfg.label_relu_before_softmax);
  auto train_cfg = [&](std::uint64_t seed) {
    TrainConfig t = cfg.train;
    t.seed = seed;
    return t;
  };

  // Baselines that other cells reuse.
  std::vector<Trained> source_nets(nsig * nrep);
  std::vector<Trained> target_nets(cfg.target_sizes.size() * nrep);
  {
    std::vector<std::function<void()>> jobs;
    if (need_source_net) {
      for (std::size_t si = 0; si < nsig; ++si) {
        for (std::size_t r = 0; r < nrep; ++r) {
          jobs.emplace_back([&, si, r] {
            Trained& out = source_nets[si * nrep + r];
            const auto start = std::chrono::steady_clock::now();
            try {
              out.net = train_source_baseline(sources[si * nrep + r].data, backbone,
                                              train_cfg(cell_seed(base, si, kUnusedAxis, "source", r)));
            } catch (const std::exception& e) {
              out.error = e.what();
            }
            out.seconds = elapsed(start);
            report("source baseline sigma=" + format_double(cfg.sigmas[si]) + " rep=" + std::to_string(r));
          });
        }
      }
    }
    if (need_target_net) {
      for (std::size_t zi = 0; zi < cfg.target_sizes.size(); ++zi) {
        for (std::size_t r = 0; r < nrep; ++r) {
          jobs.emplace_back([&, zi, r] {
            Trained& out = target_nets[zi * nrep + r];
            const auto start = std::chrono::steady_clock::now();
            try {
              out.net = train_target_baseline(reps[r].target_pool.head(cfg.target_sizes[zi]), backbone,
                                              train_cfg(cell_seed(base, kUnusedAxis, zi, "target", r)));
            } catch (const std::exception& e) {
              out.error = e.what();
            }
            out.seconds = elapsed(start);
            report("target baseline size=" + std::to_string(cfg.target_sizes[zi]) +
                   " rep=" + std::to_string(r));
          });
        }
      }
    }
    run_pool(jobs, options.workers);
  }

  // Every output row, filled by its own job.
  std::vector<SweepRow> rows;
  std::vector<std::function<void()>> jobs;
  rows.reserve(cell_count(cfg));
  for (std::size_t si = 0; si < nsig; ++si) {
    for (std::size_t zi = 0; zi < cfg.target_sizes.size(); ++zi) {
      for (const Algorithm& alg : algorithms) {
        const std::vector<std::optional<LambdaSchedule>> schedules = [&] {
          std::vector<std::optional<LambdaSchedule>> s;
          if (alg.uses_lambda()) {
            for (const auto& l : cfg.schedules) s.emplace_back(l);
          } else {
            s.emplace_back(std::nullopt);
          }
          return s;
        }();
        for (const auto& schedule : schedules) {
          for (std::size_t r = 0; r < nrep; ++r) {
            const std::size_t idx = rows.size();
            SweepRow row;
            row.sigma = cfg.sigmas[si];
            row.kl = sources[si * nrep + r].kl;
            row.target_size = cfg.target_sizes[zi];
            row.algorithm = alg.name();
            row.lambda_schedule = schedule ? schedule->to_string() : "none";
            row.lambda_resolved = schedule ? resolve_lambda(*schedule, row.kl) : 0.0;
            row.seed = r;
            rows.push_back(row);
            jobs.emplace_back([&, idx, si, zi, r, alg, schedule] {
              SweepRow& out = rows[idx];
              const Dataset& source = sources[si * nrep + r].data;
              const Dataset& test = reps[r].test;
              const auto start = std::chrono::steady_clock::now();
              double seconds = 0.0;
              try {
                const Dataset target_train = reps[r].target_pool.head(cfg.target_sizes[zi]);
                const std::uint64_t seed = cell_seed(base, si, zi, alg.name(), r);
                switch (alg.kind) {
                  case Algorithm::Kind::source: {
                    const Trained& t = source_nets[si * nrep + r];
                    if (!t.net) throw std::runtime_error(t.error);
                    out.test_accuracy = evaluate(*t.net, test);
                    seconds = t.seconds;
                    break;
                  }
                  case Algorithm::Kind::target: {
                    const Trained& t = target_nets[zi * nrep + r];
                    if (!t.net) throw std::runtime_error(t.error);
                    out.test_accuracy = evaluate(*t.net, test);
                    seconds = t.seconds;
                    break;
                  }
                  case Algorithm::Kind::dann:
                  case Algorithm::Kind::dann_target: {
                    DannConfig dc;
                    dc.train = train_cfg(seed);
                    dc.schedule = *schedule;
                    dc.kl = out.kl;
                    dc.use_target_labels = alg.kind == Algorithm::Kind::dann_target;
                    const Dataset t = dc.use_target_labels ? target_train : target_train.without_labels();
                    const DannModel m = train_dann(
                        source, t, DannSpecs::standard(input, classes, cfg.label_relu_before_softmax), dc);
                    seconds = elapsed(start);
                    out.test_accuracy = m.evaluate(test);
                    break;
                  }
                  case Algorithm::Kind::mcd: {
                    McdConfig mc;
                    mc.train = train_cfg(seed);
                    mc.lambda = out.lambda_resolved;
                    mc.generator_steps = cfg.mcd_generator_steps;
                    mc.inference = cfg.mcd_inference;
                    const McdModel m = train_mcd(source, target_train.without_labels(),
                                                 McdSpecs::standard(input, classes), mc);
                    seconds = elapsed(start);
                    out.test_accuracy = m.evaluate(test);
                    break;
                  }
                  case Algorithm::Kind::finetune: {
                    const Trained& t = source_nets[si * nrep + r];
                    if (!t.net) throw std::runtime_error("source model unavailable: " + t.error);
                    const Network tuned = fine_tune(*t.net, target_train, alg.strategy, train_cfg(seed));
                    seconds = elapsed(start);
                    out.test_accuracy = evaluate(tuned, test);
                    break;
                  }
                }
                out.status = "ok";
              } catch (const std::exception& e) {
                out.test_accuracy = std::numeric_limits<double>::quiet_NaN();
                out.status = "error: " + sanitize(e.what());
              }
              out.train_seconds = cfg.record_timing ? seconds : 0.0;
              report(out.algorithm + " sigma=" + format_double(out.sigma) + " size=" +
                     std::to_string(out.target_size) + " " + out.lambda_schedule + " rep=" +
                     std::to_string(out.seed) + " acc=" + format_double(out.test_accuracy) + " " +
                     out.status);
            });
          }
        }
      }
    }
  }
  run_pool(jobs, options.workers);

  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return std::tie(a.sigma, a.target_size, a.algorithm, a.lambda_schedule, a.seed) <
           std::tie(b.sigma, b.target_size, b.algorithm, b.lambda_schedule, b.seed);
  });
  return SweepResult{std::move(rows)};
}

// ---------------------------------------------------------------------------
// CSV

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

std::string results_to_csv(const SweepResult& result) {
  std::string out(kResultsHeader);
  out += '\n';
  for (const SweepRow& r : result.rows) {
    out += format_double(r.sigma) + ',' + format_double(r.kl) + ',' + std::to_string(r.target_size) +
           ',' + r.algorithm + ',' + r.lambda_schedule + ',' + format_double(r.lambda_resolved) + ',' +
           std::to_string(r.seed) + ',' + (r.ok() ? format_double(r.test_accuracy) : std::string()) +
           ',' + format_double(r.train_seconds) + ',' + sanitize(r.status) + '\n';
  }
  return out;
}

SweepResult results_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kResultsHeader) {
    throw std::invalid_argument("results CSV header must be: " + std::string(kResultsHeader));
  }
  SweepResult result;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 10) {
      throw std::invalid_argument("results CSV line " + std::to_string(lineno) + " has " +
                                  std::to_string(f.size()) + " columns, expected 10");
    }
    SweepRow r;
    r.sigma = parse_double(f[0]);
    r.kl = parse_double(f[1]);
    r.target_size = parse_size(f[2]);
    r.algorithm = f[3];
    r.lambda_schedule = f[4];
    r.lambda_resolved = parse_double(f[5]);
    r.seed = parse_size(f[6]);
    r.test_accuracy = parse_double(f[7]);
    r.train_seconds = parse_double(f[8]);
    r.status = f[9];
    result.rows.push_back(std::move(r));
  }
  return result;
}

void save_results(const SweepResult& result, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << results_to_csv(result);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

SweepResult load_results(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return results_from_csv(buf.str());
}

// ---------------------------------------------------------------------------
// Aggregation

std::vector<SummaryRow> summarize(const SweepResult& result, std::span<const std::string> group_by) {
  bool by_sigma = false, by_size = false, by_alg = false, by_sched = false;
  for (const auto& g : group_by) {
    if (g == "sigma") {
      by_sigma = true;
    } else if (g == "target_size") {
      by_size = true;
    } else if (g == "algorithm") {
      by_alg = true;
    } else if (g == "lambda_schedule") {
      by_sched = true;
    } else {
      throw std::invalid_argument("cannot group by '" + g + "'");
    }
  }
  std::map<SummaryKey, std::vector<const SweepRow*>> groups;
  for (const SweepRow& r : result.rows) {
    if (!r.ok()) continue;
    SummaryKey k;
    if (by_sigma) k.sigma = r.sigma;
    if (by_size) k.target_size = r.target_size;
    if (by_alg) k.algorithm = r.algorithm;
    if (by_sched) k.lambda_schedule = r.lambda_schedule;
    groups[k].push_back(&r);
  }
  if (groups.empty()) throw std::invalid_argument("nothing to summarize: no successful rows");
  std::vector<SummaryRow> out;
  for (auto& [key, members] : groups) {
    // Sum in a fixed order so the result does not depend on input row order.
    std::sort(members.begin(), members.end(), [](const SweepRow* a, const SweepRow* b) {
      return std::tie(a->sigma, a->target_size, a->algorithm, a->lambda_schedule, a->seed,
                      a->test_accuracy, a->kl) < std::tie(b->sigma, b->target_size, b->algorithm,
                                                          b->lambda_schedule, b->seed,
                                                          b->test_accuracy, b->kl);
    });
    SummaryRow s;
    s.key = key;
    s.count = members.size();
    double acc = 0.0, kl = 0.0;
    for (const SweepRow* m : members) {
      acc += m->test_accuracy;
      kl += m->kl;
    }
    const double n = static_cast<double>(members.size());
    s.mean_accuracy = acc / n;
    s.mean_kl = kl / n;
    if (members.size() > 1) {
      double ss = 0.0;
      for (const SweepRow* m : members) ss += (m->test_accuracy - s.mean_accuracy) * (m->test_accuracy - s.mean_accuracy);
      s.std_accuracy = std::sqrt(ss / (n - 1.0));
    }
    out.push_back(std::move(s));
  }
  return out;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("spearman needs two equally long series of at least 2 values");
  }
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace dtl
