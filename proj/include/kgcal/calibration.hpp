#pragma once

// Beta-Bernoulli confidence of grounded KG evidence: the probability that a
// candidate drawn uniformly from the grounding is a gold answer,
//   p = (alpha + hits) / (alpha + beta + |grounded|).

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "kgcal/evidence.hpp"

namespace kgcal {

class BetaPrior {
 public:
  // Jeffreys prior.
  BetaPrior() = default;
  // Throws ContractViolation unless both parameters are finite and positive.
  BetaPrior(double alpha, double beta);

  double alpha() const noexcept { return alpha_; }
  double beta() const noexcept { return beta_; }
  double mean() const noexcept { return alpha_ / (alpha_ + beta_); }

 private:
  double alpha_ = 0.5;
  double beta_ = 0.5;
};

double evidence_confidence(const BetaPrior& prior, std::size_t hits, std::size_t grounded);

// Both spans sorted. Warns when `answers` is empty.
double evidence_confidence(const BetaPrior& prior, std::span<const EntityId> grounded,
                           std::span<const EntityId> answers);

// Set F1 from counts; 0 when any of the three is zero.
double set_f1(std::size_t hits, std::size_t n_predicted, std::size_t n_gold);
double evidence_f1(std::span<const EntityId> grounded, std::span<const EntityId> answers);

struct EvidenceRecord {
  std::string question_id;
  std::string query_entity;
  NamedPath path;
  double confidence = 0.0;
  std::vector<std::string> grounded;
  double f1 = 0.0;
};

}  // namespace kgcal
