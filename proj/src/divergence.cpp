#include "dtl/divergence.hpp"

#include "dtl/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dtl {

NaiveBayesModel perturb_model(const NaiveBayesModel& target, const PerturbationConfig& cfg) {
  if (!(cfg.sigma >= 0.0)) throw std::invalid_argument("sigma must be nonnegative");
  Rng rng(derive_seed(cfg.seed, {fnv1a("perturb")}));
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<NaiveBayesModel::Cpt> cpts;
  cpts.reserve(target.features());
  for (std::size_t i = 0; i < target.features(); ++i) {
    NaiveBayesModel::Cpt cpt;
    for (std::size_t j = 0; j < target.classes(); ++j) {
      std::vector<double> row;
      double total = 0.0;
      for (std::size_t k = 0; k < static_cast<std::size_t>(target.arities()[i]); ++k) {
        const double p = target.cpt(i, j, k);
        if (!(p > 0.0 && p < 1.0)) {
          throw ModelError("feature " + std::to_string(i) + " row " + std::to_string(j) +
                           " cell " + std::to_string(k) + " is " + std::to_string(p) +
                           "; log odds undefined");
        }
        const double logit = std::log(p / (1.0 - p)) + cfg.sigma * noise(rng);
        const double q = logit >= 0 ? 1.0 / (1.0 + std::exp(-logit))
                                    : std::exp(logit) / (1.0 + std::exp(logit));
        row.push_back(q);
        total += q;
      }
      for (double& q : row) q /= total;
      cpt.push_back(std::move(row));
    }
    cpts.push_back(std::move(cpt));
  }
  return NaiveBayesModel(target.prior(), std::move(cpts));
}

double kl_factorized(const NaiveBayesModel& p, const NaiveBayesModel& q) {
  if (!p.same_structure(q)) {
    throw ModelError("kl: models differ in structure (class count or feature arities)");
  }
  for (std::size_t j = 0; j < p.classes(); ++j) {
    if (std::abs(p.prior()[j] - q.prior()[j]) > kProbabilitySumTolerance) {
      throw ModelError("kl: models must share the class prior; class " + std::to_string(j) +
                       " differs");
    }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < p.features(); ++i) {
    for (std::size_t j = 0; j < p.classes(); ++j) {
      double row = 0.0;
      for (std::size_t k = 0; k < static_cast<std::size_t>(p.arities()[i]); ++k) {
        const double pk = p.cpt(i, j, k);
        const double qk = q.cpt(i, j, k);
        if (pk == 0.0) continue;
        if (qk == 0.0) {
          throw ModelError("kl: q is zero where p is positive (feature " + std::to_string(i) +
                           ", class " + std::to_string(j) + ", level " + std::to_string(k) + ")");
        }
        row += pk * std::log(pk / qk);
      }
      total += p.prior()[j] * row;
    }
  }
  // Rounding can leave a tiny negative sum for near-identical models.
  return std::max(total, 0.0);
}

double kl_joint_bruteforce(const NaiveBayesModel& p, const NaiveBayesModel& q) {
  if (!p.same_structure(q)) {
    throw ModelError("kl: models differ in structure (class count or feature arities)");
  }
  double states = static_cast<double>(p.classes());
  for (int r : p.arities()) states *= r;
  if (states > kMaxJointStates) {
    throw std::invalid_argument("kl_joint_bruteforce: joint state space too large");
  }
  const std::size_t n = p.features();
  std::vector<int> x(n, 0);
  double total = 0.0;
  for (;;) {
    for (std::size_t z = 0; z < p.classes(); ++z) {
      double pj = p.prior()[z];
      double qj = q.prior()[z];
      for (std::size_t i = 0; i < n; ++i) {
        pj *= p.cpt(i, z, static_cast<std::size_t>(x[i]));
        qj *= q.cpt(i, z, static_cast<std::size_t>(x[i]));
      }
      if (pj == 0.0) continue;
      if (qj == 0.0) throw ModelError("kl: q is zero where p is positive");
      total += pj * std::log(pj / qj);
    }
    std::size_t i = 0;
    while (i < n && ++x[i] == p.arities()[i]) x[i++] = 0;
    if (i == n) break;
  }
  return total;
}

LambdaSchedule LambdaSchedule::fixed(double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("fixed lambda must be nonnegative");
  return {Kind::fixed, lambda};
}

LambdaSchedule LambdaSchedule::kl_direct() { return {Kind::kl_direct, 0.0}; }

LambdaSchedule LambdaSchedule::bounded(double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("bounded schedule needs alpha > 0");
  return {Kind::bounded, alpha};
}

LambdaSchedule LambdaSchedule::parse(std::string_view text) {
  auto number = [&](std::string_view s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw std::invalid_argument("bad number in lambda schedule '" + std::string(text) + "'");
    }
    return v;
  };
  if (text == "kl") return kl_direct();
  if (text.starts_with("fixed:")) return fixed(number(text.substr(6)));
  if (text.starts_with("bounded:")) return bounded(number(text.substr(8)));
  throw std::invalid_argument("unknown lambda schedule '" + std::string(text) +
                              "' (expected fixed:<l>, kl or bounded:<alpha>)");
}

std::string LambdaSchedule::to_string() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::fixed:
      os << "fixed:" << value_;
      break;
    case Kind::kl_direct:
      os << "kl";
      break;
    case Kind::bounded:
      os << "bounded:" << value_;
      break;
  }
  return os.str();
}

double resolve_lambda(const LambdaSchedule& schedule, double kl) {
  if (!(kl >= 0.0)) throw std::invalid_argument("kl must be nonnegative");
  switch (schedule.kind()) {
    case LambdaSchedule::Kind::fixed:
      return schedule.value();
    case LambdaSchedule::Kind::kl_direct:
      return kl;
    case LambdaSchedule::Kind::bounded:
      return schedule.value() * (1.0 - std::exp(-kl));
  }
  return 0.0;
}

}  // namespace dtl
