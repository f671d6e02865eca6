#pragma once

// JSON / JSON-lines encodings of the pipeline's records.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgcal/calibration.hpp"
#include "kgcal/metrics.hpp"
#include "kgcal/prompts.hpp"
#include "kgcal/proxy_data.hpp"
#include "kgcal/reward.hpp"

namespace kgcal {

// {"relations": ["r1", "~r2"], "constraint": {"relation": ..., "entity": ...} | null}
void to_json(nlohmann::json& j, const NamedPath& path);
void from_json(const nlohmann::json& j, NamedPath& path);

// {"id", "entity", "path", "output", "confidence", "grounded", "f1"}; "output"
// is the serialized <PATH> form and is ignored when reading.
void to_json(nlohmann::json& j, const EvidenceRecord& record);
void from_json(const nlohmann::json& j, EvidenceRecord& record);

// {"id", "question", "entities", "answers"}; numeric ids are accepted.
void to_json(nlohmann::json& j, const QaItem& item);
void from_json(const nlohmann::json& j, QaItem& item);

// {"instruction", "output", "id"}
void to_json(nlohmann::json& j, const SftRecord& record);

// {"id", "answers": {answer: confidence}, "raw_response", "uq", "parse_failed"}
// plus "first_round_response" for self-probing.
void to_json(nlohmann::json& j, const PredictionRecord& record);
void from_json(const nlohmann::json& j, PredictionRecord& record);

void to_json(nlohmann::json& j, const RewardBreakdown& r);
void to_json(nlohmann::json& j, const ConstraintDecision& d);
void to_json(nlohmann::json& j, const CalibrationReport& report);

// Identifier field that may be a string or an integer.
std::string id_from_json(const nlohmann::json& value);

// Non-empty lines only; ParseError carries the 1-based line number.
std::vector<nlohmann::json> read_jsonl(std::istream& in);
std::vector<nlohmann::json> read_jsonl_file(const std::filesystem::path& path);
void write_jsonl_line(std::ostream& out, const nlohmann::json& value);

std::vector<QaItem> read_qa(std::istream& in);
std::vector<QaItem> read_qa_file(const std::filesystem::path& path);
GoldAnswers gold_answers(const std::vector<QaItem>& qa);

// Evidence handed to the reasoner. Lines are EvidenceRecords, or proxy
// outputs {"id", "entity"?, "output": "<PATH ...>"}; proxy outputs that fail
// to parse are dropped with a warning.
struct EvidenceInput {
  std::string question_id;
  std::optional<std::string> query_entity;
  NamedPath path;
  double confidence = 0.0;
};
std::optional<EvidenceInput> evidence_input_from_json(const nlohmann::json& j);

}  // namespace kgcal
