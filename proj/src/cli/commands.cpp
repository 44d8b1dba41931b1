#include "dtl/cli.hpp"

#include "dtl/harness.hpp"
#include "dtl/random.hpp"
#include "internal.hpp"

#include <cstdio>
#include <ostream>

namespace dtl::cli {

namespace fs = std::filesystem;

namespace {

struct Context {
  std::ostream& out;
  std::ostream& err;
};

fs::path resolve_out(const json& cfg, const fs::path& fallback) {
  const std::string out = cfg.at("out").get<std::string>();
  return out.empty() ? output_root() / fallback : fs::path(out);
}

json resolve(const json& defaults, const std::string& config_path, const Overrides& overrides,
             const std::string& command) {
  json cfg = config_path.empty() ? defaults : merge_config_file(config_path, defaults, command);
  overrides.apply(cfg);
  return cfg;
}

TrainConfig train_config(const json& cfg) {
  TrainConfig t;
  t.learning_rate = cfg.at("learning_rate").get<double>();
  t.momentum = cfg.at("momentum").get<double>();
  t.batch_size = cfg.at("batch_size").get<std::size_t>();
  t.epochs = cfg.at("epochs").get<std::size_t>();
  t.seed = cfg.at("seed").get<std::uint64_t>();
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return t;
}

std::string join_arities(const std::vector<int>& arities) {
  std::string s;
  for (std::size_t i = 0; i < arities.size(); ++i) s += (i ? "," : "") + std::to_string(arities[i]);
  return s;
}

std::vector<int> split_arities(const std::string& text) {
  std::vector<int> out;
  std::istringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) out.push_back(std::stoi(cell));
  return out;
}

// Loads CSV datasets so they agree on arities: from a model file when
// given, else the per-feature maximum over all files.
std::vector<Dataset> load_datasets(const std::vector<std::string>& paths, const std::string& model_path,
                                   const std::optional<std::vector<int>>& known = std::nullopt) {
  std::vector<int> arities;
  if (!model_path.empty()) {
    arities = load_model(model_path).arities();
  } else if (known) {
    arities = *known;
  } else {
    for (const auto& p : paths) {
      const Dataset d = load_dataset_csv(p);
      if (arities.empty()) arities.assign(d.features(), 2);
      if (d.features() != arities.size()) {
        throw UsageError(p + " has " + std::to_string(d.features()) + " features, expected " +
                         std::to_string(arities.size()));
      }
      for (std::size_t i = 0; i < arities.size(); ++i) arities[i] = std::max(arities[i], d.arities()[i]);
    }
  }
  std::vector<Dataset> out;
  for (const auto& p : paths) out.push_back(load_dataset_csv(p, arities));
  return out;
}

// simulate --------------------------------------------------------------------

json simulate_defaults() {
  return {{"target_model", ""},    {"features", 64},       {"classes", 4},
          {"seed", 0},             {"sigmas", kDefaultSigmas}, {"source_size", 10000},
          {"target_size", 10000},  {"test_size", 10000},   {"out", ""}};
}

int cmd_simulate(const json& cfg, Context ctx) {
  const auto sigmas = cfg.at("sigmas").get<std::vector<double>>();
  if (sigmas.empty()) throw UsageError("simulate needs at least one sigma");
  for (double s : sigmas) {
    if (!(s >= 0.0)) throw UsageError("sigma must be nonnegative, got " + format_double(s));
  }
  const auto seed = cfg.at("seed").get<std::uint64_t>();
  const std::string model_path = cfg.at("target_model").get<std::string>();
  const NaiveBayesModel target =
      model_path.empty()
          ? default_target_model(cfg.at("features").get<int>(), cfg.at("classes").get<int>(), seed)
          : load_model(model_path);
  const fs::path dir = resolve_out(cfg, "simulate");
  fs::create_directories(dir);

  save_model(target, dir / "target.json");
  save_dataset_csv(sample(target, cfg.at("target_size").get<std::size_t>(),
                          derive_seed(seed, {fnv1a("target-train")}), "target"),
                   dir / "target_train.csv");
  save_dataset_csv(sample(target, cfg.at("test_size").get<std::size_t>(),
                          derive_seed(seed, {fnv1a("target-test")}), "target"),
                   dir / "target_test.csv");
  json manifest = json::array();
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    const NaiveBayesModel src = perturb_model(target, {sigmas[i], derive_seed(seed, {fnv1a("perturb"), i})});
    const std::string stem = "source_" + std::to_string(i);
    save_model(src, dir / (stem + ".json"));
    save_dataset_csv(sample(src, cfg.at("source_size").get<std::size_t>(),
                            derive_seed(seed, {fnv1a("source-data"), i}), stem),
                     dir / (stem + ".csv"));
    manifest.push_back({{"sigma", sigmas[i]},
                        {"model", stem + ".json"},
                        {"data", stem + ".csv"},
                        {"kl", kl_factorized(src, target)}});
    ctx.err << "simulate: sigma=" << format_double(sigmas[i]) << " -> " << stem << ".json\n";
  }
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  write_snapshot(cfg, dir / "config.json");
  return 0;
}

// kl ----------------------------------------------------------------------------

int cmd_kl(const std::string& p_path, const std::string& q_path, Context ctx) {
  const NaiveBayesModel p = load_model(p_path);
  const NaiveBayesModel q = load_model(q_path);
  double kl = 0.0;
  try {
    kl = kl_factorized(p, q);
  } catch (const ModelError& e) {
    ctx.err << "kl: " << e.what() << "\n";
    return 2;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", kl);
  ctx.out << buf << "\n";
  return 0;
}

// train -----------------------------------------------------------------------

json train_defaults() {
  const TrainConfig t;
  return {{"algorithm", "source"},
          {"source", ""},
          {"target", ""},
          {"target_model", ""},
          {"source_model", ""},
          {"base_model", ""},
          {"network", "backbone"},
          {"learning_rate", t.learning_rate},
          {"momentum", t.momentum},
          {"batch_size", t.batch_size},
          {"epochs", t.epochs},
          {"seed", t.seed},
          {"lambda_schedule", "fixed:1"},
          {"kl", 0.0},
          {"mcd_generator_steps", 4},
          {"mcd_inference", "classifier1"},
          {"label_relu_before_softmax", true},
          {"out", ""}};
}

int cmd_train(json cfg, Context ctx) {
  const Algorithm alg = Algorithm::parse(cfg.at("algorithm").get<std::string>());
  const TrainConfig train = train_config(cfg);
  const bool needs_source = alg.kind == Algorithm::Kind::source || alg.kind == Algorithm::Kind::dann ||
                            alg.kind == Algorithm::Kind::dann_target || alg.kind == Algorithm::Kind::mcd;
  const bool needs_target = alg.kind != Algorithm::Kind::source;
  const std::string source_path = cfg.at("source").get<std::string>();
  const std::string target_path = cfg.at("target").get<std::string>();
  if (needs_source && source_path.empty()) throw UsageError(alg.name() + " needs --source");
  if (needs_target && target_path.empty()) throw UsageError(alg.name() + " needs --target");

  std::vector<std::string> paths;
  if (needs_source) paths.push_back(source_path);
  if (needs_target) paths.push_back(target_path);
  std::optional<ModelBundle> base;
  std::optional<std::vector<int>> known;
  if (alg.kind == Algorithm::Kind::finetune) {
    const std::string base_path = cfg.at("base_model").get<std::string>();
    if (base_path.empty()) throw UsageError("fine-tuning needs --base-model");
    base = load_bundle(base_path);
    if (!base->trunk.empty() || !base->networks.contains("backbone")) {
      throw UsageError(base_path + " is not a single-network classifier");
    }
    if (base->metadata.contains("arities")) known = split_arities(base->metadata.at("arities"));
  }
  const auto data = load_datasets(paths, cfg.at("target_model").get<std::string>(), known);
  const Dataset& first = data.front();
  const std::size_t input = one_hot(first.head(1)).cols();
  std::size_t classes = 0;
  for (const Dataset& d : data) {
    if (d.labeled()) {
      for (int y : d.labels()) classes = std::max(classes, static_cast<std::size_t>(y) + 1);
    }
  }
  if (const std::string m = cfg.at("target_model").get<std::string>(); !m.empty()) {
    classes = load_model(m).classes();
  }
  classes = std::max<std::size_t>(classes, 2);

  double kl = cfg.at("kl").get<double>();
  const std::string sm = cfg.at("source_model").get<std::string>();
  const std::string tm = cfg.at("target_model").get<std::string>();
  if (!sm.empty() && !tm.empty()) {
    kl = kl_factorized(load_model(sm), load_model(tm));
    cfg["kl"] = kl;
  }
  const bool relu = cfg.at("label_relu_before_softmax").get<bool>();

  ModelBundle bundle;
  switch (alg.kind) {
    case Algorithm::Kind::source:
    case Algorithm::Kind::target: {
      const NetworkSpec spec = cfg.at("network").get<std::string>() == "backbone"
                                   ? presets::backbone(input, classes, relu)
                                   : presets::by_name(cfg.at("network").get<std::string>(), input, classes);
      const Network net = alg.kind == Algorithm::Kind::source ? train_source_baseline(data[0], spec, train)
                                                              : train_target_baseline(data[0], spec, train);
      bundle = classifier_bundle(net, alg.name());
      break;
    }
    case Algorithm::Kind::dann:
    case Algorithm::Kind::dann_target: {
      DannConfig dc;
      dc.train = train;
      dc.schedule = LambdaSchedule::parse(cfg.at("lambda_schedule").get<std::string>());
      dc.kl = kl;
      dc.use_target_labels = alg.kind == Algorithm::Kind::dann_target;
      const Dataset t = dc.use_target_labels ? data[1] : data[1].without_labels();
      bundle = train_dann(data[0], t, DannSpecs::standard(input, classes, relu), dc).to_bundle();
      bundle.algorithm = alg.name();
      break;
    }
    case Algorithm::Kind::mcd: {
      McdConfig mc;
      mc.train = train;
      mc.lambda = resolve_lambda(LambdaSchedule::parse(cfg.at("lambda_schedule").get<std::string>()), kl);
      mc.generator_steps = cfg.at("mcd_generator_steps").get<std::size_t>();
      const std::string inf = cfg.at("mcd_inference").get<std::string>();
      if (inf == "classifier1") {
        mc.inference = McdInference::classifier1;
      } else if (inf == "classifier2") {
        mc.inference = McdInference::classifier2;
      } else if (inf == "average") {
        mc.inference = McdInference::average;
      } else {
        throw UsageError("unknown mcd_inference '" + inf + "'");
      }
      bundle = train_mcd(data[0], data[1].without_labels(), McdSpecs::standard(input, classes), mc).to_bundle();
      break;
    }
    case Algorithm::Kind::finetune: {
      const Network tuned = fine_tune(base->network("backbone"), data[0], alg.strategy, train);
      bundle = classifier_bundle(tuned, alg.name());
      break;
    }
  }
  bundle.metadata["arities"] = join_arities(first.arities());
  bundle.metadata["seed"] = std::to_string(train.seed);

  const fs::path dir = resolve_out(cfg, "train-" + alg.name());
  fs::create_directories(dir);
  save_bundle(bundle, dir / "model.json");
  write_snapshot(cfg, dir / "config.json");
  ctx.err << "train: wrote " << (dir / "model.json").string() << "\n";
  return 0;
}

// eval ------------------------------------------------------------------------

int cmd_eval(const std::string& model_path, const std::string& data_path, const std::string& target_model,
             Context ctx) {
  const ModelBundle bundle = load_bundle(model_path);
  std::optional<std::vector<int>> known;
  if (bundle.metadata.contains("arities")) known = split_arities(bundle.metadata.at("arities"));
  const auto data = load_datasets({data_path}, target_model, known);
  if (!data[0].labeled()) throw UsageError(data_path + " has no label column");
  json result = {{"model", model_path},
                 {"data", data_path},
                 {"rows", data[0].rows()},
                 {"accuracy", bundle.evaluate(data[0])}};
  if (!target_model.empty()) {
    result["bayes_optimal_accuracy"] = bayes_optimal_accuracy(load_model(target_model), data[0]);
  }
  ctx.out << result.dump() << "\n";
  return 0;
}

// sweep -----------------------------------------------------------------------

int cmd_sweep(const std::string& config_path, const Overrides& overrides, const std::string& out,
              std::size_t workers, bool dry_run, Context ctx) {
  SweepConfig base;
  try {
    if (!config_path.empty()) base = sweep_config_from_json(read_text(config_path));
  } catch (const std::invalid_argument& e) {
    throw UsageError(config_path + ": " + e.what());
  }
  json j = json::parse(sweep_config_to_json(base));
  overrides.apply(j);
  SweepConfig cfg;
  try {
    cfg = sweep_config_from_json(j.dump());
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (dry_run) {
    ctx.out << cell_count(cfg) << "\n";
    return 0;
  }
  const fs::path dir = (out.empty() ? output_root() : fs::path(out)) / ("run-" + config_hash(cfg));
  fs::create_directories(dir);
  write_text(dir / "config.json", sweep_config_to_json(cfg) + "\n");
  SweepOptions options;
  options.workers = workers;
  options.model_dir = dir / "models";
  options.progress = [&](const std::string& line) { ctx.err << "[sweep] " << line << "\n"; };
  const SweepResult result = run_sweep(cfg, options);
  save_results(result, dir / "results.csv");
  const auto failed = std::count_if(result.rows.begin(), result.rows.end(),
                                    [](const SweepRow& r) { return !r.ok(); });
  ctx.err << "sweep: " << result.rows.size() << " rows, " << failed << " failed, written to "
          << (dir / "results.csv").string() << "\n";
  return failed == 0 ? 0 : 1;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Context ctx{out, err};
  CLI::App app{"Transfer learning experiments on synthetic naive-Bayes data", "dtl-cli"};
  app.require_subcommand(1);

  // simulate
  CLI::App* simulate = app.add_subcommand("simulate", "Write a target model, perturbed source models and sampled datasets");
  std::string simulate_config;
  Overrides simulate_flags;
  simulate->add_option("--config", simulate_config, "JSON config file");
  simulate_flags.option<std::string>(simulate, "--target-model", "/target_model", "Use this model instead of generating one");
  simulate_flags.option<int>(simulate, "--features", "/features", "Binary features of the generated target");
  simulate_flags.option<int>(simulate, "--classes", "/classes", "Classes of the generated target");
  simulate_flags.option<std::uint64_t>(simulate, "--seed", "/seed", "Base seed");
  simulate_flags.option<std::vector<double>>(simulate, "--sigma", "/sigmas", "Perturbation strengths")
      ->expected(1, -1);
  simulate_flags.option<std::size_t>(simulate, "--source-size", "/source_size", "Rows per source dataset");
  simulate_flags.option<std::size_t>(simulate, "--target-size", "/target_size", "Rows of target training data");
  simulate_flags.option<std::size_t>(simulate, "--test-size", "/test_size", "Rows of target test data");
  simulate_flags.option<std::string>(simulate, "--out", "/out", "Output directory");

  // kl
  CLI::App* kl = app.add_subcommand("kl", "Print KL(p || q) between two model files");
  std::string kl_p, kl_q;
  kl->add_option("p", kl_p, "Model p")->required();
  kl->add_option("q", kl_q, "Model q")->required();

  // train
  CLI::App* train = app.add_subcommand("train", "Train one algorithm on CSV datasets");
  std::string train_config_path;
  Overrides train_flags;
  train->add_option("--config", train_config_path, "JSON config file");
  train_flags.option<std::string>(train, "--algorithm", "/algorithm",
                                  "source, target, dann, dann_target, mcd, finetune_all, finetune_last<k>, finetune_freeze<k>");
  train_flags.option<std::string>(train, "--source", "/source", "Labeled source CSV");
  train_flags.option<std::string>(train, "--target", "/target", "Target CSV");
  train_flags.option<std::string>(train, "--target-model", "/target_model", "Target model; fixes arities and class count");
  train_flags.option<std::string>(train, "--source-model", "/source_model", "Source model; with --target-model sets kl");
  train_flags.option<std::string>(train, "--base-model", "/base_model", "Trained classifier to fine-tune");
  train_flags.option<std::string>(train, "--network", "/network", "backbone or m1..m6 for baselines");
  train_flags.option<double>(train, "--lr", "/learning_rate", "Learning rate");
  train_flags.option<double>(train, "--momentum", "/momentum", "Momentum");
  train_flags.option<std::size_t>(train, "--batch-size", "/batch_size", "Mini-batch size");
  train_flags.option<std::size_t>(train, "--epochs", "/epochs", "Epochs");
  train_flags.option<std::uint64_t>(train, "--seed", "/seed", "Seed");
  train_flags.option<std::string>(train, "--lambda", "/lambda_schedule", "fixed:<l>, kl or bounded:<alpha>");
  train_flags.option<double>(train, "--kl", "/kl", "Source-target divergence for the lambda schedule");
  train_flags.option<std::size_t>(train, "--mcd-generator-steps", "/mcd_generator_steps", "Generator steps per MCD iteration");
  train_flags.option<std::string>(train, "--mcd-inference", "/mcd_inference", "classifier1, classifier2 or average");
  train_flags.option<bool>(train, "--label-relu", "/label_relu_before_softmax", "ReLU before the label softmax");
  train_flags.option<std::string>(train, "--out", "/out", "Output directory");

  // sweep
  CLI::App* sweep = app.add_subcommand("sweep", "Run an experiment grid and write results CSV");
  std::string sweep_config_path, sweep_out;
  std::size_t workers = 1;
  bool dry_run = false;
  Overrides sweep_flags;
  sweep->add_option("--config", sweep_config_path, "JSON sweep config");
  sweep->add_option("--out", sweep_out, "Output root; results go to run-<config hash> inside it");
  sweep->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  sweep->add_flag("--dry-run", dry_run, "Print the number of cells and exit");
  sweep_flags.option<std::vector<double>>(sweep, "--sigma", "/sigmas", "Perturbation strengths")->expected(1, -1);
  sweep_flags.option<std::vector<std::size_t>>(sweep, "--target-size", "/target_sizes", "Target training sizes")
      ->expected(1, -1);
  sweep_flags.option<std::vector<std::string>>(sweep, "--algorithm", "/algorithms", "Algorithms")->expected(1, -1);
  sweep_flags.option<std::vector<std::string>>(sweep, "--lambda", "/lambda_schedules", "Lambda schedules")
      ->expected(1, -1);
  sweep_flags.option<std::size_t>(sweep, "--replicates", "/replicates", "Replicates per cell");
  sweep_flags.option<std::uint64_t>(sweep, "--seed", "/base_seed", "Base seed");
  sweep_flags.option<std::size_t>(sweep, "--source-size", "/source_size", "Source rows");
  sweep_flags.option<std::size_t>(sweep, "--test-size", "/test_size", "Target test rows");
  sweep_flags.option<std::size_t>(sweep, "--epochs", "/train/epochs", "Epochs");
  sweep_flags.option<double>(sweep, "--lr", "/train/learning_rate", "Learning rate");
  sweep_flags.option<std::size_t>(sweep, "--batch-size", "/train/batch_size", "Mini-batch size");
  sweep_flags.option<std::string>(sweep, "--target-model", "/target/path", "Target model file");
  sweep_flags.option<int>(sweep, "--features", "/target/features", "Binary features of the generated target");
  sweep_flags.option<int>(sweep, "--classes", "/target/classes", "Classes of the generated target");
  sweep_flags.option<std::uint64_t>(sweep, "--target-seed", "/target/seed", "Seed of the generated target");
  sweep_flags.flag(sweep, "--timing", "/record_timing", "Record wall-clock training time");

  // plot
  CLI::App* plot = app.add_subcommand("plot", "Render an SVG figure from a results CSV");
  std::string plot_results, plot_figure = "acc_vs_kl", plot_out;
  PlotFilter filter;
  plot->add_option("results", plot_results, "Results CSV")->required();
  plot->add_option("--figure", plot_figure, "acc_vs_kl or model_comparison");
  plot->add_option("--out", plot_out, "SVG path");
  plot->add_option("--algorithm", filter.algorithms, "Keep only these algorithms");
  plot->add_option("--target-size", filter.target_sizes, "Keep only these target sizes");
  plot->add_option("--lambda", filter.schedules, "Keep only these lambda schedules");

  // eval
  CLI::App* eval = app.add_subcommand("eval", "Accuracy of a trained model on a labeled CSV");
  std::string eval_model, eval_data, eval_target;
  eval->add_option("model", eval_model, "Model file written by train")->required();
  eval->add_option("data", eval_data, "Labeled CSV")->required();
  eval->add_option("--target-model", eval_target, "Target model; also reports Bayes-optimal accuracy");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (simulate->parsed()) {
      return cmd_simulate(resolve(simulate_defaults(), simulate_config, simulate_flags, "simulate"), ctx);
    }
    if (kl->parsed()) return cmd_kl(kl_p, kl_q, ctx);
    if (train->parsed()) {
      return cmd_train(resolve(train_defaults(), train_config_path, train_flags, "train"), ctx);
    }
    if (sweep->parsed()) return cmd_sweep(sweep_config_path, sweep_flags, sweep_out, workers, dry_run, ctx);
    if (plot->parsed()) {
      const Figure figure = parse_figure(plot_figure);
      const std::string svg = render_plot(read_text(plot_results), figure, filter);
      const fs::path path = plot_out.empty() ? output_root() / (plot_figure + ".svg") : fs::path(plot_out);
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      write_text(path, svg);
      json snapshot = {{"results", plot_results},
                       {"figure", plot_figure},
                       {"algorithms", filter.algorithms},
                       {"target_sizes", filter.target_sizes},
                       {"lambda_schedules", filter.schedules},
                       {"out", path.string()}};
      write_snapshot(snapshot, path.string() + ".config.json");
      return 0;
    }
    if (eval->parsed()) return cmd_eval(eval_model, eval_data, eval_target, ctx);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace dtl::cli
