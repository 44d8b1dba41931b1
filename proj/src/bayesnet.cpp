#include "dtl/bayesnet.hpp"

#include "dtl/random.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace dtl {

namespace {

std::string describe_sum(double s) {
  std::ostringstream os;
  os.precision(17);
  os << s;
  return os.str();
}

void check_distribution(const std::vector<double>& row, const std::string& what) {
  if (row.empty()) throw ModelError(what + " is empty");
  double total = 0.0;
  for (std::size_t k = 0; k < row.size(); ++k) {
    const double p = row[k];
    if (!(p > 0.0 && p <= 1.0)) {
      throw ModelError(what + " entry " + std::to_string(k) + " = " + describe_sum(p) +
                       " is outside (0, 1]");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > kProbabilitySumTolerance) {
    throw ModelError(what + " sums to " + describe_sum(total) + ", expected 1");
  }
}

// Row ~ Dirichlet(alpha) via normalized Gamma(alpha, 1) draws.
std::vector<double> dirichlet(Rng& rng, std::size_t k, double alpha) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> row(k);
  double total = 0.0;
  for (double& v : row) {
    v = gamma(rng);
    total += v;
  }
  if (total <= 0.0) {
    std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(k));
    return row;
  }
  for (double& v : row) v /= total;
  return row;
}

// Raises cells below `floor` to it and rescales the remaining cells so the
// row still sums to one. Repeats until no rescaled cell falls below the floor.
void apply_floor(std::vector<double>& row, double floor) {
  std::vector<bool> pinned(row.size(), false);
  for (;;) {
    double pinned_mass = 0.0;
    double free_mass = 0.0;
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (!pinned[k] && row[k] < floor) pinned[k] = true;
      if (pinned[k]) {
        row[k] = floor;
        pinned_mass += floor;
      } else {
        free_mass += row[k];
      }
    }
    const double factor = (1.0 - pinned_mass) / free_mass;
    bool changed = false;
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (pinned[k]) continue;
      row[k] *= factor;
      if (row[k] < floor) changed = true;
    }
    if (!changed) break;
  }
}

std::size_t draw_categorical(Rng& rng, const std::vector<double>& probs) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return k;
  }
  return probs.size() - 1;
}

// log p(z) and log p(x_i | z) tables.
struct LogTables {
  std::vector<double> prior;
  std::vector<std::vector<std::vector<double>>> cpts;

  explicit LogTables(const NaiveBayesModel& m) {
    for (double p : m.prior()) prior.push_back(std::log(p));
    for (const auto& cpt : m.cpts()) {
      auto& out = cpts.emplace_back();
      for (const auto& row : cpt) {
        auto& r = out.emplace_back();
        for (double p : row) r.push_back(std::log(p));
      }
    }
  }

  int predict(std::span<const int> row) const {
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < prior.size(); ++j) {
      double score = prior[j];
      for (std::size_t i = 0; i < row.size(); ++i) {
        score += cpts[i][j][static_cast<std::size_t>(row[i])];
      }
      if (score > best_score) {
        best_score = score;
        best = static_cast<int>(j);
      }
    }
    return best;
  }
};

void check_row_against(const NaiveBayesModel& model, std::span<const int> row) {
  if (row.size() != model.features()) {
    throw DataError("row has " + std::to_string(row.size()) + " features, model has " +
                    std::to_string(model.features()));
  }
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (row[i] < 0 || row[i] >= model.arities()[i]) {
      throw DataError("feature " + std::to_string(i) + " value " + std::to_string(row[i]) +
                      " outside arity " + std::to_string(model.arities()[i]));
    }
  }
}

}  // namespace

NaiveBayesModel::NaiveBayesModel(std::vector<double> prior, std::vector<Cpt> cpts)
    : prior_(std::move(prior)), cpts_(std::move(cpts)) {
  check_distribution(prior_, "prior");
  for (std::size_t i = 0; i < cpts_.size(); ++i) {
    const Cpt& cpt = cpts_[i];
    if (cpt.size() != prior_.size()) {
      throw ModelError("feature " + std::to_string(i) + " has " + std::to_string(cpt.size()) +
                       " CPT rows, expected " + std::to_string(prior_.size()));
    }
    const std::size_t arity = cpt.front().size();
    for (std::size_t j = 0; j < cpt.size(); ++j) {
      const std::string where = "feature " + std::to_string(i) + " row " + std::to_string(j);
      if (cpt[j].size() != arity) throw ModelError(where + " has inconsistent arity");
      check_distribution(cpt[j], where);
    }
    arities_.push_back(static_cast<int>(arity));
  }
}

std::size_t NaiveBayesModel::one_hot_width() const {
  return static_cast<std::size_t>(std::accumulate(arities_.begin(), arities_.end(), 0));
}

Dataset::Dataset(std::vector<int> arities, std::size_t rows, std::vector<int> cells,
                 std::optional<std::vector<int>> labels, Provenance provenance)
    : arities_(std::move(arities)),
      rows_(rows),
      cells_(std::move(cells)),
      labels_(std::move(labels)),
      provenance_(std::move(provenance)) {
  if (cells_.size() != rows_ * arities_.size()) {
    throw DataError("dataset has " + std::to_string(cells_.size()) + " cells, expected " +
                    std::to_string(rows_ * arities_.size()));
  }
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t i = 0; i < arities_.size(); ++i) {
      const int v = cells_[r * arities_.size() + i];
      if (v < 0 || v >= arities_[i]) {
        throw DataError("row " + std::to_string(r) + " feature " + std::to_string(i) +
                        " value " + std::to_string(v) + " outside arity " +
                        std::to_string(arities_[i]));
      }
    }
  }
  if (labels_ && labels_->size() != rows_) {
    throw DataError("label count " + std::to_string(labels_->size()) + " differs from row count " +
                    std::to_string(rows_));
  }
  if (labels_) {
    for (int l : *labels_) {
      if (l < 0) throw DataError("negative label " + std::to_string(l));
    }
  }
}

const std::vector<int>& Dataset::labels() const {
  if (!labels_) throw DataError("dataset has no labels");
  return *labels_;
}

Dataset Dataset::head(std::size_t count) const {
  count = std::min(count, rows_);
  std::vector<int> cells(cells_.begin(),
                         cells_.begin() + static_cast<std::ptrdiff_t>(count * arities_.size()));
  std::optional<std::vector<int>> labels;
  if (labels_) labels.emplace(labels_->begin(), labels_->begin() + static_cast<std::ptrdiff_t>(count));
  Provenance p = provenance_;
  p.size = count;
  return Dataset(arities_, count, std::move(cells), std::move(labels), std::move(p));
}

Dataset Dataset::without_labels() const {
  return Dataset(arities_, rows_, cells_, std::nullopt, provenance_);
}

NaiveBayesModel default_target_model(int binary_features, int classes, std::uint64_t seed) {
  if (binary_features < 1) throw std::invalid_argument("need at least one feature");
  if (classes < 2) throw std::invalid_argument("need at least two classes");
  Rng rng(derive_seed(seed, {fnv1a("target-model")}));
  std::vector<double> prior = dirichlet(rng, static_cast<std::size_t>(classes), 5.0);
  apply_floor(prior, kCptFloor);
  std::vector<NaiveBayesModel::Cpt> cpts;
  for (int i = 0; i < binary_features; ++i) {
    NaiveBayesModel::Cpt cpt;
    for (int j = 0; j < classes; ++j) {
      std::vector<double> row = dirichlet(rng, 2, 1.0);
      apply_floor(row, kCptFloor);
      cpt.push_back(std::move(row));
    }
    cpts.push_back(std::move(cpt));
  }
  return NaiveBayesModel(std::move(prior), std::move(cpts));
}

Dataset sample(const NaiveBayesModel& model, std::size_t count, std::uint64_t seed,
               std::string model_id) {
  if (count < 1) throw std::invalid_argument("sample count must be at least 1");
  Rng rng(seed);
  const std::size_t n = model.features();
  std::vector<int> cells(count * n);
  std::vector<int> labels(count);
  for (std::size_t r = 0; r < count; ++r) {
    const std::size_t z = draw_categorical(rng, model.prior());
    labels[r] = static_cast<int>(z);
    for (std::size_t i = 0; i < n; ++i) {
      cells[r * n + i] = static_cast<int>(draw_categorical(rng, model.cpts()[i][z]));
    }
  }
  return Dataset(model.arities(), count, std::move(cells), std::move(labels),
                 Provenance{std::move(model_id), seed, count});
}

int bayes_predict(const NaiveBayesModel& model, std::span<const int> row) {
  check_row_against(model, row);
  return LogTables(model).predict(row);
}

double bayes_optimal_accuracy(const NaiveBayesModel& model_true, const Dataset& test) {
  if (test.rows() == 0) throw DataError("empty test set");
  const auto& labels = test.labels();
  const LogTables tables(model_true);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < test.rows(); ++r) {
    check_row_against(model_true, test.row(r));
    if (tables.predict(test.row(r)) == labels[r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.rows());
}

Tensor one_hot(const Dataset& data, std::span<const int> arities) {
  if (arities.size() != data.features()) {
    throw DataError("one_hot: " + std::to_string(arities.size()) + " arities for " +
                    std::to_string(data.features()) + " features");
  }
  std::vector<std::size_t> offsets(arities.size());
  std::size_t width = 0;
  for (std::size_t i = 0; i < arities.size(); ++i) {
    if (arities[i] < data.arities()[i]) {
      throw DataError("one_hot: feature " + std::to_string(i) + " arity " +
                      std::to_string(arities[i]) + " smaller than data arity " +
                      std::to_string(data.arities()[i]));
    }
    offsets[i] = width;
    width += static_cast<std::size_t>(arities[i]);
  }
  Tensor out(data.rows(), width);
  for (std::size_t r = 0; r < data.rows(); ++r) {
    for (std::size_t i = 0; i < arities.size(); ++i) {
      out(r, offsets[i] + static_cast<std::size_t>(data.cell(r, i))) = 1.0;
    }
  }
  return out;
}

std::string model_to_json(const NaiveBayesModel& model) {
  nlohmann::ordered_json j;
  j["version"] = kModelFileVersion;
  j["s"] = model.classes();
  j["arities"] = model.arities();
  j["prior"] = model.prior();
  j["cpts"] = model.cpts();
  return j.dump(1);
}

NaiveBayesModel model_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ModelError(std::string("malformed model file: ") + e.what());
  }
  try {
    if (!j.is_object()) throw ModelError("model file must be a JSON object");
    for (const char* key : {"version", "s", "arities", "prior", "cpts"}) {
      if (!j.contains(key)) throw ModelError(std::string("model file missing field '") + key + "'");
    }
    for (const auto& item : j.items()) {
      const std::string& k = item.key();
      if (k != "version" && k != "s" && k != "arities" && k != "prior" && k != "cpts") {
        throw ModelError("model file has unknown field '" + k + "'");
      }
    }
    const int version = j.at("version").get<int>();
    if (version != kModelFileVersion) {
      throw ModelError("unsupported model file version " + std::to_string(version));
    }
    auto prior = j.at("prior").get<std::vector<double>>();
    auto cpts = j.at("cpts").get<std::vector<NaiveBayesModel::Cpt>>();
    const auto s = j.at("s").get<std::size_t>();
    const auto arities = j.at("arities").get<std::vector<int>>();
    if (prior.size() != s) {
      throw ModelError("prior has " + std::to_string(prior.size()) + " entries but s = " +
                       std::to_string(s));
    }
    if (arities.size() != cpts.size()) {
      throw ModelError("arities lists " + std::to_string(arities.size()) + " features but cpts has " +
                       std::to_string(cpts.size()));
    }
    for (std::size_t i = 0; i < cpts.size(); ++i) {
      for (std::size_t r = 0; r < cpts[i].size(); ++r) {
        if (static_cast<int>(cpts[i][r].size()) != arities[i]) {
          throw ModelError("feature " + std::to_string(i) + " row " + std::to_string(r) +
                           " length differs from declared arity " + std::to_string(arities[i]));
        }
      }
    }
    return NaiveBayesModel(std::move(prior), std::move(cpts));
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const NaiveBayesModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << model_to_json(model) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

NaiveBayesModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return model_from_json(buf.str());
  } catch (const ModelError& e) {
    throw ModelError(path.string() + ": " + e.what());
  }
}

void save_dataset_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t i = 0; i < data.features(); ++i) out << (i ? "," : "") << 'x' << i;
  if (data.labeled()) out << (data.features() ? "," : "") << "label";
  out << '\n';
  for (std::size_t r = 0; r < data.rows(); ++r) {
    for (std::size_t i = 0; i < data.features(); ++i) out << (i ? "," : "") << data.cell(r, i);
    if (data.labeled()) out << (data.features() ? "," : "") << data.labels()[r];
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Dataset load_dataset_csv(const std::filesystem::path& path,
                         std::optional<std::vector<int>> arities) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": missing header");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) header.push_back(tok);
  }
  bool has_label = !header.empty() && header.back() == "label";
  const std::size_t n = header.size() - (has_label ? 1 : 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (header[i] != "x" + std::to_string(i)) {
      throw DataError(path.string() + ": header column " + std::to_string(i) + " is '" +
                      header[i] + "', expected 'x" + std::to_string(i) + "'");
    }
  }
  std::vector<int> cells;
  std::vector<int> labels;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t col = 0;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (true) {
      int v = 0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc()) {
        throw DataError(path.string() + ": bad integer at line " + std::to_string(rows + 2));
      }
      if (has_label && col == n) {
        labels.push_back(v);
      } else {
        cells.push_back(v);
      }
      ++col;
      p = next;
      if (p == end) break;
      if (*p != ',') throw DataError(path.string() + ": bad separator at line " + std::to_string(rows + 2));
      ++p;
    }
    if (col != header.size()) {
      throw DataError(path.string() + ": line " + std::to_string(rows + 2) + " has " +
                      std::to_string(col) + " columns, expected " + std::to_string(header.size()));
    }
    ++rows;
  }
  std::vector<int> ar;
  if (arities) {
    if (arities->size() != n) {
      throw DataError(path.string() + ": " + std::to_string(n) + " features but " +
                      std::to_string(arities->size()) + " arities supplied");
    }
    ar = std::move(*arities);
  } else {
    ar.assign(n, 2);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t i = 0; i < n; ++i) ar[i] = std::max(ar[i], cells[r * n + i] + 1);
    }
  }
  std::optional<std::vector<int>> lab;
  if (has_label) lab = std::move(labels);
  return Dataset(std::move(ar), rows, std::move(cells), std::move(lab),
                 Provenance{path.filename().string(), 0, rows});
}

}  // namespace dtl
