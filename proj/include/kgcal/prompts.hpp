#pragma once

// Verbalized KG context and the three verbalized-UQ prompt templates.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgcal/evidence.hpp"
#include "kgcal/kg_store.hpp"

namespace kgcal {

inline constexpr std::string_view kDefaultInstruction =
    "Based on the reasoning paths, please answer the given question.";

inline constexpr std::size_t kDefaultMaxContextLines = 50;

enum class UqMethod { vanilla, cot, self_probing };

std::string_view to_string(UqMethod method);
// Accepts "vanilla", "cot", "self-probing" and "self_probing".
UqMethod parse_uq_method(std::string_view name);

struct ContextLine {
  std::string walk;  // e0 -> r1 -> e1 -> ... -> ek
  double confidence = 0.0;

  std::string render() const;
};

struct EvidenceContext {
  std::string question;
  std::vector<ContextLine> lines;

  // One line per walk, newline separated.
  std::string render() const;
};

struct EvidenceItem {
  EntityId query_entity;
  ConstrainedPath path;
  double confidence = 0.0;
};

// Up to two decimals with trailing zeros trimmed, keeping one: 0.8, 0.75, 1.0.
std::string format_context_confidence(double confidence);

// Expands every item into one line per grounded walk. A walk reached by
// several items keeps the highest confidence. Lines are ordered by
// confidence (descending) then text, and capped at `max_lines`.
EvidenceContext verbalize_evidence(const KnowledgeGraph& g, std::string question,
                                   std::span<const EvidenceItem> evidence,
                                   std::size_t max_lines = kDefaultMaxContextLines);

// Vanilla and CoT give one prompt. Self-probing gives the answer-elicitation
// prompt followed by the confidence-elicitation follow-up.
std::vector<std::string> render_prompt(const EvidenceContext& ctx, UqMethod method,
                                       std::string_view instruction = kDefaultInstruction);

using AnswerMap = std::map<std::string, double>;

// First well-formed {answer: confidence, ...} object in the response, with
// confidences clipped to [0,1]. Bare (unquoted) keys are accepted. Throws
// ParseFailure when nothing usable is found.
AnswerMap parse_prediction(std::string_view response);

// Inverse of parse_prediction for a clean map (used by the mock reasoner).
std::string render_answer_map(const AnswerMap& answers);

struct PredictionRecord {
  std::string question_id;
  AnswerMap answers;
  std::string raw_response;
  std::optional<std::string> first_round_response;
  UqMethod method = UqMethod::vanilla;
  bool parse_failed = false;
};

}  // namespace kgcal
