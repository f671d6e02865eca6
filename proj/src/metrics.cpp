#include "kgcal/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <set>

#include "kgcal/calibration.hpp"
#include "kgcal/errors.hpp"

namespace kgcal {

std::string normalize_answer(std::string_view answer) {
  const auto b = answer.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = answer.find_last_not_of(" \t\r\n");
  std::string out(answer.substr(b, e - b + 1));
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

namespace {

std::set<std::string> normalized_gold(const GoldAnswers& gold, const std::string& question_id) {
  const auto it = gold.find(question_id);
  if (it == gold.end()) throw ContractViolation("prediction for unknown question id '" + question_id + "'");
  std::set<std::string> out;
  for (const auto& a : it->second) out.insert(normalize_answer(a));
  return out;
}

}  // namespace

QaScores qa_accuracy(std::span<const PredictionRecord> predictions, const GoldAnswers& gold) {
  QaScores scores;
  scores.n_questions = predictions.size();
  for (const auto& p : predictions) {
    const auto gold_set = normalized_gold(gold, p.question_id);
    if (p.parse_failed) continue;
    std::set<std::string> predicted;
    for (const auto& [answer, _] : p.answers) predicted.insert(normalize_answer(answer));
    std::size_t hits = 0;
    for (const auto& a : predicted) hits += gold_set.count(a);

    scores.hit += hits > 0 ? 1.0 : 0.0;
    scores.recall += gold_set.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(gold_set.size());
    scores.macro_f1 += set_f1(hits, predicted.size(), gold_set.size());
  }
  if (scores.n_questions > 0) {
    const double n = static_cast<double>(scores.n_questions);
    scores.hit /= n;
    scores.recall /= n;
    scores.macro_f1 /= n;
  }
  return scores;
}

std::size_t confidence_bin(double confidence, std::size_t n_bins) {
  if (confidence <= 0.0) return 0;
  const double n = static_cast<double>(n_bins);
  auto k = static_cast<std::ptrdiff_t>(std::ceil(confidence * n)) - 1;
  k = std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(n_bins) - 1);
  // Settle against the exact edges k/n so values on an edge land in the lower bin.
  while (k > 0 && confidence <= static_cast<double>(k) / n) --k;
  while (k + 1 < static_cast<std::ptrdiff_t>(n_bins) && confidence > static_cast<double>(k + 1) / n) ++k;
  return static_cast<std::size_t>(k);
}

CalibrationReport ece(std::span<const CalibrationSample> samples, std::size_t n_bins) {
  if (n_bins == 0) throw ContractViolation("n_bins must be at least 1");
  if (samples.empty()) throw NoSamplesError();

  std::vector<std::vector<double>> confidences(n_bins);
  std::vector<std::size_t> correct(n_bins, 0);
  for (const auto& s : samples) {
    if (!(s.confidence >= 0.0 && s.confidence <= 1.0)) {
      throw ContractViolation("confidence outside [0,1]");
    }
    const auto b = confidence_bin(s.confidence, n_bins);
    confidences[b].push_back(s.confidence);
    correct[b] += s.correct ? 1 : 0;
  }

  CalibrationReport report;
  report.n_samples = samples.size();
  const double n = static_cast<double>(samples.size());
  for (std::size_t b = 0; b < n_bins; ++b) {
    ReliabilityBin bin;
    bin.lower = static_cast<double>(b) / static_cast<double>(n_bins);
    bin.upper = static_cast<double>(b + 1) / static_cast<double>(n_bins);
    bin.count = confidences[b].size();
    if (bin.count > 0) {
      // Summing in sorted order makes the result independent of sample order.
      std::sort(confidences[b].begin(), confidences[b].end());
      double sum = 0.0;
      for (double c : confidences[b]) sum += c;
      const double count = static_cast<double>(bin.count);
      bin.mean_confidence = sum / count;
      bin.accuracy = static_cast<double>(correct[b]) / count;
      report.ece += (count / n) * std::abs(bin.accuracy - bin.mean_confidence);
    }
    report.bins.push_back(bin);
  }
  return report;
}

std::vector<CalibrationSample> calibration_samples(std::span<const PredictionRecord> predictions,
                                                   const GoldAnswers& gold) {
  std::vector<CalibrationSample> samples;
  for (const auto& p : predictions) {
    const auto gold_set = normalized_gold(gold, p.question_id);
    if (p.parse_failed) {
      samples.push_back({0.0, false});
      continue;
    }
    for (const auto& [answer, conf] : p.answers) {
      samples.push_back({conf, gold_set.contains(normalize_answer(answer))});
    }
  }
  return samples;
}

CalibrationReport evaluate(std::span<const PredictionRecord> predictions, const GoldAnswers& gold,
                           std::size_t n_bins) {
  const auto qa = qa_accuracy(predictions, gold);
  CalibrationReport report = ece(calibration_samples(predictions, gold), n_bins);
  report.hit = qa.hit;
  report.recall = qa.recall;
  report.macro_f1 = qa.macro_f1;
  report.n_questions = qa.n_questions;
  report.parse_failures = static_cast<std::size_t>(
      std::count_if(predictions.begin(), predictions.end(), [](const auto& p) { return p.parse_failed; }));
  return report;
}

void write_reliability_csv(std::ostream& out, const CalibrationReport& report) {
  out << "lower,upper,count,mean_confidence,accuracy\n";
  char buf[160];
  for (const auto& b : report.bins) {
    std::snprintf(buf, sizeof buf, "%.6g,%.6g,%zu,%.17g,%.17g\n", b.lower, b.upper, b.count,
                  b.mean_confidence, b.accuracy);
    out << buf;
  }
}

}  // namespace kgcal
