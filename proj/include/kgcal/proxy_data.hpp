#pragma once

// Training data for the evidence proxy and the XML-style evidence grammar
//
//   <PATH confidence=C>r1<SEP>...<SEP>rl</PATH>
//   <PATH confidence=C>r1<SEP>...<SEP>rl<CONSTRAINT>rc<SEP>ent</CONSTRAINT></PATH>
//
// C is written with two decimals. Inverse steps carry a '~' prefix.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgcal/calibration.hpp"
#include "kgcal/evidence.hpp"
#include "kgcal/kg_store.hpp"

namespace kgcal {

struct ParsedEvidence {
  double confidence = 0.0;
  NamedPath path;
};

// Fixed two-decimal rendering used inside <PATH confidence=...>.
std::string format_confidence(double confidence);

// Throws SerializationError on an empty path, a confidence outside [0,1],
// or a name that would not survive parsing.
std::string serialize_evidence(const NamedPath& path, double confidence);

// Parses the first <PATH ...> block in `text`; prose around it is ignored.
// Throws InvalidOutput on any grammar violation.
ParsedEvidence parse_evidence(std::string_view text);

enum class Stage { sft, rl };

std::string proxy_instruction(Stage stage, std::string_view question);

struct QaItem {
  std::string id;
  std::string question;
  std::vector<std::string> entities;
  std::vector<std::string> answers;
};

struct SftRecord {
  std::string instruction;
  std::string target;
  std::string question_id;
};

// One constraint considered for a base path, kept or not.
struct ConstraintDecision {
  std::string question_id;
  std::string query_entity;
  NamedPath base;
  NamedConstraint constraint;
  double base_confidence = 0.0;
  double constrained_confidence = 0.0;
  bool retained = false;
};

struct SkipEntry {
  std::string question_id;
  std::string reason;
};

struct SftBuildOptions {
  BetaPrior prior;
  SearchOptions search;
  Stage stage = Stage::sft;
  // Also emit auxiliary question -> answers records for external trainers.
  bool with_qa_records = false;
  std::size_t concurrency = 1;
};

struct SftDataset {
  std::vector<SftRecord> records;
  std::vector<EvidenceRecord> evidence;
  std::vector<ConstraintDecision> decisions;
  std::vector<SkipEntry> skipped;
};

// For every question: shortest paths from each query entity to each gold
// answer, their Beta-Bernoulli confidence, and the mined constraints that
// strictly raise that confidence. Unconstrained paths are always emitted.
SftDataset build_sft_dataset(const KnowledgeGraph& g, std::span<const QaItem> qa,
                             const SftBuildOptions& options);

}  // namespace kgcal
