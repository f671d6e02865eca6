#pragma once

// RL reward for generated evidence against a question's gold evidence set.
//
//   m      = w * Jaccard + (1 - w) * (1 - lev / max_len)
//   R_inf  = F1(gold) * m
//   c      = p(A | gold) * m
//   R_cal  = max(0, 1 - xi * |c_hat - c|)
//   R      = lambda * R_inf + (1 - lambda) * R_cal        (max over gold)
//   R'     = 3 * sigmoid(xi' * (R - 0.5)) - 1             (invalid text: penalty)

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgcal/calibration.hpp"
#include "kgcal/evidence.hpp"
#include "kgcal/proxy_data.hpp"

namespace kgcal {

struct RewardConfig {
  double lambda = 0.85;
  double xi = 2.0;
  double xi_prime = 2.0;
  double invalid_penalty = -3.0;
  double advantage_epsilon = 1e-8;
  // Weight of Jaccard against the Levenshtein ratio in the match score.
  double jaccard_weight = 0.5;

  // Throws ContractViolation on out-of-range values.
  void validate() const;
};

struct RewardBreakdown {
  double match = 0.0;
  double r_inf = 0.0;
  double r_cal = 0.0;
  double target_confidence = 0.0;
  double combined = 0.0;
  double smoothed = 0.0;
  int best_gold_index = -1;
  bool valid = false;
};

// Token sequence compared by the match score: path steps in order, then the
// constraint relation and entity, each tagged so they never collide with a
// path relation of the same name.
std::vector<std::string> match_tokens(const NamedPath& path);

std::size_t levenshtein(std::span<const std::string> a, std::span<const std::string> b);

double match_score(const NamedPath& generated, const NamedPath& gold, double jaccard_weight = 0.5);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double smooth_reward(double combined, double xi_prime);

// Reward terms for a single gold evidence, given its match score.
RewardBreakdown score_against_gold(double match, double gold_f1, double gold_confidence,
                                   double generated_confidence, const RewardConfig& cfg);

// Throws ContractViolation when `gold` is empty.
RewardBreakdown reward(const ParsedEvidence& generated, std::span<const EvidenceRecord> gold,
                       const RewardConfig& cfg);

RewardBreakdown invalid_reward(const RewardConfig& cfg);

// Parses raw proxy output first; grammar violations score the penalty.
RewardBreakdown reward_for_output(std::string_view raw, std::span<const EvidenceRecord> gold,
                                  const RewardConfig& cfg);

// Group-normalized advantages (r_i - mean) / (std + epsilon) with the
// population standard deviation. Singleton and zero-variance groups give 0.
std::vector<double> group_advantages(std::span<const double> rewards, double epsilon = 1e-8);

}  // namespace kgcal
