#include "kgcal/reward.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "kgcal/errors.hpp"

namespace kgcal {

void RewardConfig::validate() const {
  const auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!(lambda > 0.0 && lambda < 1.0)) throw ContractViolation("lambda must lie in (0,1)");
  if (!positive(xi)) throw ContractViolation("xi must be positive");
  if (!positive(xi_prime)) throw ContractViolation("xi_prime must be positive");
  if (!positive(advantage_epsilon)) throw ContractViolation("advantage_epsilon must be positive");
  if (!std::isfinite(invalid_penalty)) throw ContractViolation("invalid_penalty must be finite");
  if (!(jaccard_weight >= 0.0 && jaccard_weight <= 1.0)) {
    throw ContractViolation("jaccard_weight must lie in [0,1]");
  }
}

std::vector<std::string> match_tokens(const NamedPath& path) {
  std::vector<std::string> tokens;
  tokens.reserve(path.steps.size() + 2);
  for (const auto& s : path.steps) tokens.push_back(step_token(s));
  if (path.constraint) {
    tokens.push_back("\x01" + path.constraint->relation);
    tokens.push_back("\x02" + path.constraint->entity);
  }
  return tokens;
}

std::size_t levenshtein(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

double match_score(const NamedPath& generated, const NamedPath& gold, double jaccard_weight) {
  const auto a = match_tokens(generated);
  const auto b = match_tokens(gold);
  if (a.empty() && b.empty()) return 1.0;

  const std::set<std::string> sa(a.begin(), a.end());
  const std::set<std::string> sb(b.begin(), b.end());
  std::size_t common = 0;
  for (const auto& t : sa) common += sb.count(t);
  const double jaccard = static_cast<double>(common) / static_cast<double>(sa.size() + sb.size() - common);

  const double ratio = 1.0 - static_cast<double>(levenshtein(a, b)) /
                                 static_cast<double>(std::max(a.size(), b.size()));
  return jaccard_weight * jaccard + (1.0 - jaccard_weight) * ratio;
}

double smooth_reward(double combined, double xi_prime) {
  return 3.0 * sigmoid(xi_prime * (combined - 0.5)) - 1.0;
}

RewardBreakdown score_against_gold(double match, double gold_f1, double gold_confidence,
                                   double generated_confidence, const RewardConfig& cfg) {
  RewardBreakdown r;
  r.valid = true;
  r.match = match;
  r.r_inf = gold_f1 * match;
  r.target_confidence = gold_confidence * match;
  r.r_cal = std::max(0.0, 1.0 - cfg.xi * std::abs(generated_confidence - r.target_confidence));
  r.combined = cfg.lambda * r.r_inf + (1.0 - cfg.lambda) * r.r_cal;
  r.smoothed = smooth_reward(r.combined, cfg.xi_prime);
  return r;
}

RewardBreakdown reward(const ParsedEvidence& generated, std::span<const EvidenceRecord> gold,
                       const RewardConfig& cfg) {
  if (gold.empty()) throw ContractViolation("reward requires a nonempty gold evidence set");
  RewardBreakdown best;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const double m = match_score(generated.path, gold[i].path, cfg.jaccard_weight);
    auto r = score_against_gold(m, gold[i].f1, gold[i].confidence, generated.confidence, cfg);
    // Smoothing is monotone, so selecting on the raw reward picks the same gold.
    if (best.best_gold_index < 0 || r.combined > best.combined) {
      r.best_gold_index = static_cast<int>(i);
      best = r;
    }
  }
  return best;
}

RewardBreakdown invalid_reward(const RewardConfig& cfg) {
  RewardBreakdown r;
  r.smoothed = cfg.invalid_penalty;
  return r;
}

RewardBreakdown reward_for_output(std::string_view raw, std::span<const EvidenceRecord> gold,
                                  const RewardConfig& cfg) {
  if (gold.empty()) throw ContractViolation("reward requires a nonempty gold evidence set");
  try {
    return reward(parse_evidence(raw), gold, cfg);
  } catch (const InvalidOutput&) {
    return invalid_reward(cfg);
  }
}

std::vector<double> group_advantages(std::span<const double> rewards, double epsilon) {
  if (rewards.empty()) throw ContractViolation("advantages need at least one reward");
  const double n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= n;

  std::vector<double> adv(rewards.size(), 0.0);
  if (rewards.size() == 1 || var == 0.0) return adv;
  const double denom = std::sqrt(var) + epsilon;
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / denom;
  return adv;
}

}  // namespace kgcal
