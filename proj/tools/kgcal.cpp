// kgcal: command-line front end for the calibrated KG-evidence pipeline.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kgcal/errors.hpp"
#include "kgcal/evidence.hpp"
#include "kgcal/json_io.hpp"
#include "kgcal/kg_store.hpp"
#include "kgcal/log.hpp"
#include "kgcal/metrics.hpp"
#include "kgcal/pipeline.hpp"
#include "kgcal/proxy_data.hpp"
#include "kgcal/reward.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOptions {
  std::string config_file;
  std::vector<std::string> overrides;
  bool verbose = false;
};

void add_common(CLI::App* cmd, CommonOptions& common) {
  cmd->add_option("--config", common.config_file, "key = value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--set", common.overrides, "override one config key (key=value); repeatable");
  cmd->add_flag("-v,--verbose", common.verbose, "log progress to stderr");
}

// Config file first, then --set overrides, then the explicit flags collected
// by each subcommand.
kgcal::PipelineConfig resolve_config(const CommonOptions& common,
                                     const std::vector<std::pair<std::string, std::string>>& flags) {
  if (common.verbose) kgcal::log::set_level(kgcal::log::Level::info);
  kgcal::PipelineConfig cfg;
  if (!common.config_file.empty()) kgcal::apply_config_file(cfg, common.config_file);
  for (const auto& kv : common.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw kgcal::ContractViolation("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  for (const auto& [k, v] : flags) cfg.set(k, v);
  cfg.validate();
  return cfg;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw kgcal::Error("cannot write " + path);
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto at = s.find(sep, start);
    parts.push_back(s.substr(start, at - start));
    if (at == std::string::npos) break;
    start = at + 1;
  }
  return parts;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Calibrated knowledge-graph evidence for question answering"};
  app.require_subcommand(1);

  // kg stats
  std::string stats_file;
  auto* kg_cmd = app.add_subcommand("kg", "knowledge-graph utilities");
  kg_cmd->require_subcommand(1);
  auto* stats_cmd = kg_cmd->add_subcommand("stats", "print entity/relation/triple counts as JSON");
  stats_cmd->add_option("file", stats_file, "triple TSV")->required()->check(CLI::ExistingFile);

  // ground
  CommonOptions ground_common;
  std::string ground_kg, ground_entity, ground_path, ground_constraint;
  bool ground_inverse = false;
  auto* ground_cmd = app.add_subcommand("ground", "ground a constrained relational path");
  ground_cmd->add_option("--kg", ground_kg, "triple TSV")->required()->check(CLI::ExistingFile);
  ground_cmd->add_option("--entity", ground_entity, "query entity name")->required();
  ground_cmd->add_option("--path", ground_path, "comma-separated relations (~rel for inverse)")->required();
  ground_cmd->add_option("--constraint", ground_constraint, "answer-side constraint rel=entity");
  ground_cmd->add_flag("--allow-inverse", ground_inverse, "permit ~rel inverse steps");
  add_common(ground_cmd, ground_common);

  // build-sft
  CommonOptions build_common;
  std::string build_kg, build_qa, build_out, build_evidence_out, build_decisions_out, build_stage;
  std::optional<std::size_t> build_depth;
  bool build_with_qa = false;
  auto* build_cmd = app.add_subcommand("build-sft", "build proxy training records from QA pairs");
  build_cmd->add_option("--kg", build_kg, "triple TSV")->required()->check(CLI::ExistingFile);
  build_cmd->add_option("--qa", build_qa, "QA JSONL")->required()->check(CLI::ExistingFile);
  build_cmd->add_option("--out", build_out, "output JSONL of {instruction, output, id}")->required();
  build_cmd->add_option("--max-depth", build_depth, "maximum path length (default 4)");
  build_cmd->add_option("--stage", build_stage, "instruction variant")->check(CLI::IsMember({"sft", "rl"}));
  build_cmd->add_option("--evidence-out", build_evidence_out, "also write EvidenceRecords as JSONL");
  build_cmd->add_option("--decisions-out", build_decisions_out, "also write constraint decisions as JSONL");
  build_cmd->add_flag("--with-qa", build_with_qa, "also emit auxiliary question->answers records");
  add_common(build_cmd, build_common);

  // reward
  CommonOptions reward_common;
  std::string reward_gold, reward_generated, reward_out;
  auto* reward_cmd = app.add_subcommand("reward", "score generated evidence against gold evidence");
  reward_cmd->add_option("--gold", reward_gold, "EvidenceRecord JSONL")->required()->check(CLI::ExistingFile);
  reward_cmd->add_option("--generated", reward_generated, "JSONL of {id, output}")->required()->check(CLI::ExistingFile);
  reward_cmd->add_option("--out", reward_out, "output JSONL of reward breakdowns")->required();
  add_common(reward_cmd, reward_common);

  // infer
  CommonOptions infer_common;
  std::string infer_kg, infer_evidence, infer_qa, infer_out, infer_backend, infer_uq;
  auto* infer_cmd = app.add_subcommand("infer", "prompt a reasoner with calibrated evidence");
  infer_cmd->add_option("--kg", infer_kg, "triple TSV")->required()->check(CLI::ExistingFile);
  infer_cmd->add_option("--evidence", infer_evidence, "evidence JSONL")->required()->check(CLI::ExistingFile);
  infer_cmd->add_option("--qa", infer_qa, "QA JSONL")->required()->check(CLI::ExistingFile);
  infer_cmd->add_option("--backend", infer_backend, "reasoner backend")->check(CLI::IsMember({"mock", "http"}));
  infer_cmd->add_option("--uq", infer_uq, "UQ prompt")->check(CLI::IsMember({"vanilla", "cot", "self-probing"}));
  infer_cmd->add_option("--out", infer_out, "output PredictionRecord JSONL")->required();
  add_common(infer_cmd, infer_common);

  // evaluate
  CommonOptions eval_common;
  std::string eval_predictions, eval_gold, eval_out;
  std::optional<std::size_t> eval_bins;
  auto* eval_cmd = app.add_subcommand("evaluate", "accuracy and calibration report");
  eval_cmd->add_option("--predictions", eval_predictions, "PredictionRecord JSONL")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--gold", eval_gold, "QA JSONL with gold answers")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--bins", eval_bins, "number of ECE bins (default 10)");
  eval_cmd->add_option("--out", eval_out, "report JSON; reliability.csv is written alongside")->required();
  add_common(eval_cmd, eval_common);

  // pipeline
  CommonOptions pipe_common;
  std::string pipe_kg, pipe_qa, pipe_out, pipe_evidence, pipe_backend, pipe_uq;
  auto* pipe_cmd = app.add_subcommand("pipeline", "run every stage end to end");
  pipe_cmd->add_option("--kg", pipe_kg, "triple TSV")->required();
  pipe_cmd->add_option("--qa", pipe_qa, "QA JSONL")->required();
  pipe_cmd->add_option("--out-dir", pipe_out, "artifact directory")->required();
  pipe_cmd->add_option("--evidence", pipe_evidence, "proxy evidence JSONL instead of gold-side evidence");
  pipe_cmd->add_option("--backend", pipe_backend, "reasoner backend")->check(CLI::IsMember({"mock", "http"}));
  pipe_cmd->add_option("--uq", pipe_uq, "UQ prompt")->check(CLI::IsMember({"vanilla", "cot", "self-probing"}));
  add_common(pipe_cmd, pipe_common);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*stats_cmd) {
      const auto g = kgcal::load_kg_file(stats_file);
      std::cout << json{{"entities", g.num_entities()},
                        {"relations", g.num_relations()},
                        {"triples", g.num_triples()}}
                       .dump()
                << '\n';
      return 0;
    }

    if (*ground_cmd) {
      std::vector<std::pair<std::string, std::string>> flags;
      if (ground_inverse) flags.emplace_back("allow_inverse", "true");
      const auto cfg = resolve_config(ground_common, flags);
      const auto g = kgcal::load_kg_file(ground_kg);

      kgcal::NamedPath named;
      if (!ground_path.empty()) {
        for (const auto& token : split(ground_path, ',')) {
          auto step = kgcal::parse_step_token(token);
          if (step.direction == kgcal::Direction::inverse && !cfg.search.allow_inverse) {
            throw kgcal::ContractViolation("inverse step '" + token + "' needs --allow-inverse");
          }
          named.steps.push_back(std::move(step));
        }
      }
      if (!ground_constraint.empty()) {
        const auto eq = ground_constraint.find('=');
        if (eq == std::string::npos) throw kgcal::ContractViolation("--constraint expects rel=entity");
        named.constraint = kgcal::NamedConstraint{ground_constraint.substr(0, eq), ground_constraint.substr(eq + 1)};
      }
      const auto result = kgcal::ground(g, g.entity_or_unknown(ground_entity), kgcal::resolve(g, named));
      std::vector<std::string> names;
      for (auto id : result.candidates) names.push_back(g.entity_name(id));
      std::sort(names.begin(), names.end());
      std::cout << json(names).dump() << '\n';
      return 0;
    }

    if (*build_cmd) {
      std::vector<std::pair<std::string, std::string>> flags;
      if (build_depth) flags.emplace_back("max_depth", std::to_string(*build_depth));
      if (!build_stage.empty()) flags.emplace_back("stage", build_stage);
      const auto cfg = resolve_config(build_common, flags);
      const auto g = kgcal::load_kg_file(build_kg);
      const auto qa = kgcal::read_qa_file(build_qa);
      const auto dataset = kgcal::build_sft_dataset(
          g, qa, {cfg.prior, cfg.search, cfg.stage, build_with_qa, cfg.concurrency});

      auto out = open_out(build_out);
      for (const auto& r : dataset.records) kgcal::write_jsonl_line(out, r);
      if (!build_evidence_out.empty()) {
        auto ev = open_out(build_evidence_out);
        for (const auto& r : dataset.evidence) kgcal::write_jsonl_line(ev, r);
      }
      if (!build_decisions_out.empty()) {
        auto dec = open_out(build_decisions_out);
        for (const auto& d : dataset.decisions) kgcal::write_jsonl_line(dec, d);
      }
      json skipped = json::array();
      for (const auto& s : dataset.skipped) skipped.push_back({{"id", s.question_id}, {"reason", s.reason}});
      std::cerr << json{{"questions", qa.size()},
                        {"records", dataset.records.size()},
                        {"evidence", dataset.evidence.size()},
                        {"skipped", skipped}}
                       .dump()
                << '\n';
      return 0;
    }

    if (*reward_cmd) {
      const auto cfg = resolve_config(reward_common, {});
      std::map<std::string, std::vector<kgcal::EvidenceRecord>> gold;
      for (const auto& j : kgcal::read_jsonl_file(reward_gold)) {
        auto r = j.get<kgcal::EvidenceRecord>();
        gold[r.question_id].push_back(std::move(r));
      }

      struct Scored {
        std::string id;
        kgcal::RewardBreakdown breakdown;
      };
      std::vector<Scored> scored;
      for (const auto& j : kgcal::read_jsonl_file(reward_generated)) {
        const auto id = kgcal::id_from_json(j.at("id"));
        const auto it = gold.find(id);
        if (it == gold.end()) throw kgcal::ContractViolation("no gold evidence for question '" + id + "'");
        scored.push_back({id, kgcal::reward_for_output(j.at("output").get<std::string>(), it->second, cfg.reward)});
      }

      // Advantages are normalized within each question's group of generations.
      std::map<std::string, std::vector<std::size_t>> groups;
      for (std::size_t i = 0; i < scored.size(); ++i) groups[scored[i].id].push_back(i);
      std::vector<double> advantage(scored.size(), 0.0);
      for (const auto& [_, members] : groups) {
        std::vector<double> rewards;
        for (auto i : members) rewards.push_back(scored[i].breakdown.smoothed);
        const auto adv = kgcal::group_advantages(rewards, cfg.reward.advantage_epsilon);
        for (std::size_t k = 0; k < members.size(); ++k) advantage[members[k]] = adv[k];
      }

      auto out = open_out(reward_out);
      for (std::size_t i = 0; i < scored.size(); ++i) {
        json j = scored[i].breakdown;
        j["id"] = scored[i].id;
        j["advantage"] = advantage[i];
        kgcal::write_jsonl_line(out, j);
      }
      return 0;
    }

    if (*infer_cmd) {
      std::vector<std::pair<std::string, std::string>> flags;
      if (!infer_backend.empty()) flags.emplace_back("backend", infer_backend);
      if (!infer_uq.empty()) flags.emplace_back("uq", infer_uq);
      const auto cfg = resolve_config(infer_common, flags);
      const auto g = kgcal::load_kg_file(infer_kg);
      const auto qa = kgcal::read_qa_file(infer_qa);
      std::vector<kgcal::EvidenceInput> evidence;
      for (const auto& j : kgcal::read_jsonl_file(infer_evidence)) {
        if (auto e = kgcal::evidence_input_from_json(j)) evidence.push_back(std::move(*e));
      }
      const auto backend = kgcal::make_backend(cfg);
      const auto predictions = kgcal::run_inference(g, qa, evidence, *backend, cfg);
      auto out = open_out(infer_out);
      for (const auto& p : predictions) kgcal::write_jsonl_line(out, p);
      return 0;
    }

    if (*eval_cmd) {
      std::vector<std::pair<std::string, std::string>> flags;
      if (eval_bins) flags.emplace_back("n_bins", std::to_string(*eval_bins));
      const auto cfg = resolve_config(eval_common, flags);
      std::vector<kgcal::PredictionRecord> predictions;
      for (const auto& j : kgcal::read_jsonl_file(eval_predictions)) {
        predictions.push_back(j.get<kgcal::PredictionRecord>());
      }
      const auto gold = kgcal::gold_answers(kgcal::read_qa_file(eval_gold));
      const auto report = kgcal::evaluate(predictions, gold, cfg.n_bins);
      auto out = open_out(eval_out);
      out << json(report).dump(2) << '\n';
      const auto csv_path = fs::path(eval_out).parent_path() / "reliability.csv";
      std::ofstream csv(csv_path, std::ios::binary | std::ios::trunc);
      kgcal::write_reliability_csv(csv, report);
      return 0;
    }

    if (*pipe_cmd) {
      std::vector<std::pair<std::string, std::string>> flags;
      if (!pipe_backend.empty()) flags.emplace_back("backend", pipe_backend);
      if (!pipe_uq.empty()) flags.emplace_back("uq", pipe_uq);
      const auto cfg = resolve_config(pipe_common, flags);
      kgcal::PipelinePaths paths{pipe_kg, pipe_qa, pipe_out, std::nullopt};
      if (!pipe_evidence.empty()) paths.evidence = pipe_evidence;
      return kgcal::run_pipeline(cfg, paths, std::cerr);
    }
  } catch (const std::exception& e) {
    std::cerr << "kgcal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
