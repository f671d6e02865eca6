#pragma once

// QA accuracy (Hit / Recall / macro-F1) and expected calibration error.

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgcal/prompts.hpp"

namespace kgcal {

// question id -> gold answer strings
using GoldAnswers = std::map<std::string, std::vector<std::string>>;

// Trim and ASCII case-fold; the only normalization applied when matching
// predicted answers against gold.
std::string normalize_answer(std::string_view answer);

struct QaScores {
  double hit = 0.0;
  double recall = 0.0;
  double macro_f1 = 0.0;
  std::size_t n_questions = 0;
};

// Macro averages over the prediction list. Throws ContractViolation for a
// prediction whose question id has no gold entry.
QaScores qa_accuracy(std::span<const PredictionRecord> predictions, const GoldAnswers& gold);

struct CalibrationSample {
  double confidence = 0.0;
  bool correct = false;
};

struct ReliabilityBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  double mean_confidence = 0.0;
  double accuracy = 0.0;
};

struct CalibrationReport {
  std::vector<ReliabilityBin> bins;
  double ece = 0.0;
  std::size_t n_samples = 0;
  double hit = 0.0;
  double recall = 0.0;
  double macro_f1 = 0.0;
  std::size_t n_questions = 0;
  std::size_t parse_failures = 0;
};

// Bin of a confidence among n equal-width bins (lower, upper], the first
// bin closed at 0.
std::size_t confidence_bin(double confidence, std::size_t n_bins);

// Fills bins, ece and n_samples. Throws NoSamplesError on an empty sample
// set and ContractViolation on n_bins == 0 or a confidence outside [0,1].
CalibrationReport ece(std::span<const CalibrationSample> samples, std::size_t n_bins = 10);

// One sample per predicted (answer, confidence) pair; a parse failure
// contributes a single (0, incorrect) sample.
std::vector<CalibrationSample> calibration_samples(std::span<const PredictionRecord> predictions,
                                                   const GoldAnswers& gold);

// ECE plus QA accuracy in one report.
CalibrationReport evaluate(std::span<const PredictionRecord> predictions, const GoldAnswers& gold,
                           std::size_t n_bins = 10);

void write_reliability_csv(std::ostream& out, const CalibrationReport& report);

}  // namespace kgcal
