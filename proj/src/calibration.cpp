#include "kgcal/calibration.hpp"

#include <cmath>

#include "kgcal/errors.hpp"
#include "kgcal/log.hpp"

namespace kgcal {

BetaPrior::BetaPrior(double alpha, double beta) : alpha_(alpha), beta_(beta) {
  if (!(std::isfinite(alpha) && std::isfinite(beta) && alpha > 0.0 && beta > 0.0)) {
    throw ContractViolation("Beta prior parameters must be finite and positive");
  }
}

double evidence_confidence(const BetaPrior& prior, std::size_t hits, std::size_t grounded) {
  if (hits > grounded) throw ContractViolation("hit count exceeds grounded candidate count");
  return (prior.alpha() + static_cast<double>(hits)) /
         (prior.alpha() + prior.beta() + static_cast<double>(grounded));
}

double evidence_confidence(const BetaPrior& prior, std::span<const EntityId> grounded,
                           std::span<const EntityId> answers) {
  if (answers.empty()) log::warn("evidence confidence computed against an empty gold answer set");
  return evidence_confidence(prior, intersection_size(grounded, answers), grounded.size());
}

double set_f1(std::size_t hits, std::size_t n_predicted, std::size_t n_gold) {
  if (hits == 0 || n_predicted == 0 || n_gold == 0) return 0.0;
  const double precision = static_cast<double>(hits) / static_cast<double>(n_predicted);
  const double recall = static_cast<double>(hits) / static_cast<double>(n_gold);
  return 2.0 * precision * recall / (precision + recall);
}

double evidence_f1(std::span<const EntityId> grounded, std::span<const EntityId> answers) {
  return set_f1(intersection_size(grounded, answers), grounded.size(), answers.size());
}

}  // namespace kgcal
