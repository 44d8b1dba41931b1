#pragma once

// Source models derived from a target model by log-odds noise, the KL
// divergence between two naive-Bayes models, and the lambda schedules that
// map a divergence to an adversarial loss weight.

#include "dtl/bayesnet.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace dtl {

struct PerturbationConfig {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

/// Copies the prior. Every CPT cell p goes to sigmoid(logit(p) + e) with
/// e ~ N(0, sigma^2) drawn independently per cell, then each row is
/// renormalized. Throws ModelError for cells at exactly 0 or 1.
NaiveBayesModel perturb_model(const NaiveBayesModel& target, const PerturbationConfig& cfg);

/// sum_i sum_j sum_k p(x_i=k|z=j) p(z=j) log(p(x_i=k|z=j) / q(x_i=k|z=j)),
/// natural log. Requires identical structure and identical priors.
double kl_factorized(const NaiveBayesModel& p, const NaiveBayesModel& q);

/// Largest joint state space kl_joint_bruteforce will enumerate.
inline constexpr double kMaxJointStates = 1e6;

/// KL over the full joint p(x_1..x_n, z) by enumeration. Any priors.
double kl_joint_bruteforce(const NaiveBayesModel& p, const NaiveBayesModel& q);

class LambdaSchedule {
 public:
  enum class Kind { fixed, kl_direct, bounded };

  static LambdaSchedule fixed(double lambda);
  static LambdaSchedule kl_direct();
  static LambdaSchedule bounded(double alpha);
  /// Parses "fixed:<l>", "kl" or "bounded:<alpha>".
  static LambdaSchedule parse(std::string_view text);

  Kind kind() const { return kind_; }
  double value() const { return value_; }
  /// Inverse of parse.
  std::string to_string() const;

  friend bool operator==(const LambdaSchedule&, const LambdaSchedule&) = default;

 private:
  LambdaSchedule(Kind k, double v) : kind_(k), value_(v) {}
  Kind kind_ = Kind::fixed;
  double value_ = 1.0;
};

/// fixed(l) -> l; kl_direct -> kl; bounded(a) -> a (1 - exp(-kl)).
double resolve_lambda(const LambdaSchedule& schedule, double kl);

}  // namespace dtl
