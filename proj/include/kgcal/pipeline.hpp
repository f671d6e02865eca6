#pragma once

// End-to-end orchestration: load -> build evidence/SFT data -> select top-K
// evidence -> infer -> evaluate, with every intermediate written as JSONL.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "kgcal/calibration.hpp"
#include "kgcal/evidence.hpp"
#include "kgcal/json_io.hpp"
#include "kgcal/prompts.hpp"
#include "kgcal/proxy_data.hpp"
#include "kgcal/reasoner.hpp"
#include "kgcal/reward.hpp"

namespace kgcal {

struct PipelineConfig {
  BetaPrior prior;
  SearchOptions search;
  RewardConfig reward;
  std::size_t top_k = 3;
  std::size_t n_bins = 10;
  std::string backend = "mock";
  UqMethod uq = UqMethod::vanilla;
  std::size_t concurrency = 4;
  std::size_t max_context_lines = kDefaultMaxContextLines;
  std::string instruction{kDefaultInstruction};
  Stage stage = Stage::sft;
  std::optional<double> mock_force_confidence;
  HttpReasonerConfig http = HttpReasonerConfig::from_env();

  // Sets one key from its textual value. Throws ContractViolation on an
  // unknown key, a malformed value, or an attempt to set a secret.
  void set(std::string_view key, std::string_view value);
  void validate() const;
  // Resolved configuration; never includes the API key.
  nlohmann::json to_json() const;
};

// Flat `key = value` lines; '#' starts a comment; values may be quoted.
void apply_config(PipelineConfig& cfg, std::istream& in);
void apply_config_file(PipelineConfig& cfg, const std::filesystem::path& path);

std::unique_ptr<ReasonerBackend> make_backend(const PipelineConfig& cfg);

// Keeps the k most confident evidence items per question, ties broken by
// query entity then path text. Question order follows first appearance.
std::vector<EvidenceInput> select_top_k(std::vector<EvidenceInput> evidence, std::size_t k);

std::vector<EvidenceInput> as_evidence_inputs(const std::vector<EvidenceRecord>& records);

// One PredictionRecord per QA item, in QA order. Evidence without an entity
// is grounded from each of the question's query entities.
std::vector<PredictionRecord> run_inference(const KnowledgeGraph& g, const std::vector<QaItem>& qa,
                                            const std::vector<EvidenceInput>& evidence,
                                            const ReasonerBackend& backend, const PipelineConfig& cfg);

struct PipelinePaths {
  std::filesystem::path kg;
  std::filesystem::path qa;
  std::filesystem::path out_dir;
  // Proxy outputs to use instead of confidence-ranked gold-side evidence.
  std::optional<std::filesystem::path> evidence;
};

inline constexpr std::string_view kFailedMarker = "FAILED";

// Returns 0 on success. Input failures return 2 before anything is written;
// a failing stage returns 1, keeps earlier artifacts and writes FAILED.
int run_pipeline(const PipelineConfig& cfg, const PipelinePaths& paths, std::ostream& log);

}  // namespace kgcal
