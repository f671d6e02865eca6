#include "kgcal/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "kgcal/errors.hpp"
#include "kgcal/log.hpp"
#include "kgcal/metrics.hpp"
#include "kgcal/parallel.hpp"

namespace kgcal {
namespace {

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ContractViolation("config '" + std::string(key) + "': not a number: '" + std::string(v) + "'");
  }
  return out;
}

std::size_t to_size(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ContractViolation("config '" + std::string(key) + "': not a non-negative integer: '" + std::string(v) + "'");
  }
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ContractViolation("config '" + std::string(key) + "': not a boolean: '" + std::string(v) + "'");
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

}  // namespace

void PipelineConfig::set(std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "alpha") {
    prior = BetaPrior(to_double(key, value), prior.beta());
  } else if (key == "beta") {
    prior = BetaPrior(prior.alpha(), to_double(key, value));
  } else if (key == "max_depth") {
    search.max_depth = to_size(key, value);
  } else if (key == "allow_inverse") {
    search.allow_inverse = to_bool(key, value);
  } else if (key == "max_paths") {
    search.max_paths = to_size(key, value);
  } else if (key == "lambda") {
    reward.lambda = to_double(key, value);
  } else if (key == "xi") {
    reward.xi = to_double(key, value);
  } else if (key == "xi_prime") {
    reward.xi_prime = to_double(key, value);
  } else if (key == "invalid_penalty") {
    reward.invalid_penalty = to_double(key, value);
  } else if (key == "advantage_epsilon") {
    reward.advantage_epsilon = to_double(key, value);
  } else if (key == "jaccard_weight") {
    reward.jaccard_weight = to_double(key, value);
  } else if (key == "top_k") {
    top_k = to_size(key, value);
  } else if (key == "n_bins" || key == "bins") {
    n_bins = to_size(key, value);
  } else if (key == "backend") {
    backend = std::string(value);
  } else if (key == "uq") {
    uq = parse_uq_method(value);
  } else if (key == "concurrency") {
    concurrency = to_size(key, value);
  } else if (key == "max_context_lines") {
    max_context_lines = to_size(key, value);
  } else if (key == "instruction") {
    instruction = std::string(value);
  } else if (key == "stage") {
    if (value == "sft") {
      stage = Stage::sft;
    } else if (value == "rl") {
      stage = Stage::rl;
    } else {
      throw ContractViolation("config 'stage': expected sft or rl");
    }
  } else if (key == "mock_force_confidence") {
    if (value.empty() || value == "none") {
      mock_force_confidence.reset();
    } else {
      mock_force_confidence = to_double(key, value);
    }
  } else if (key == "api_base") {
    http.base_url = std::string(value);
  } else if (key == "model") {
    http.model = std::string(value);
  } else if (key == "temperature") {
    http.temperature = to_double(key, value);
  } else if (key == "timeout_ms") {
    http.timeout = std::chrono::milliseconds(to_size(key, value));
  } else if (key == "max_attempts") {
    http.max_attempts = static_cast<int>(to_size(key, value));
  } else if (key == "backoff_ms") {
    http.initial_backoff = std::chrono::milliseconds(to_size(key, value));
  } else if (key == "api_key") {
    throw ContractViolation("api_key may only be supplied through KGCAL_API_KEY or OPENAI_API_KEY");
  } else {
    throw ContractViolation("unknown config key '" + std::string(key) + "'");
  }
}

void PipelineConfig::validate() const {
  reward.validate();
  if (search.max_depth < 1) throw ContractViolation("max_depth must be at least 1");
  if (search.max_paths < 1) throw ContractViolation("max_paths must be at least 1");
  if (top_k < 1) throw ContractViolation("top_k must be at least 1");
  if (n_bins < 1) throw ContractViolation("n_bins must be at least 1");
  if (concurrency < 1) throw ContractViolation("concurrency must be at least 1");
  if (backend != "mock" && backend != "http") throw ContractViolation("backend must be mock or http");
  if (mock_force_confidence && !(*mock_force_confidence >= 0.0 && *mock_force_confidence <= 1.0)) {
    throw ContractViolation("mock_force_confidence must lie in [0,1]");
  }
  if (http.max_attempts < 1) throw ContractViolation("max_attempts must be at least 1");
}

nlohmann::json PipelineConfig::to_json() const {
  nlohmann::json j = {
      {"alpha", prior.alpha()},
      {"beta", prior.beta()},
      {"max_depth", search.max_depth},
      {"allow_inverse", search.allow_inverse},
      {"max_paths", search.max_paths},
      {"lambda", reward.lambda},
      {"xi", reward.xi},
      {"xi_prime", reward.xi_prime},
      {"invalid_penalty", reward.invalid_penalty},
      {"advantage_epsilon", reward.advantage_epsilon},
      {"jaccard_weight", reward.jaccard_weight},
      {"top_k", top_k},
      {"n_bins", n_bins},
      {"backend", backend},
      {"uq", std::string(to_string(uq))},
      {"concurrency", concurrency},
      {"max_context_lines", max_context_lines},
      {"instruction", instruction},
      {"stage", stage == Stage::sft ? "sft" : "rl"},
      {"mock_force_confidence", nullptr},
  };
  if (mock_force_confidence) j["mock_force_confidence"] = *mock_force_confidence;
  if (backend == "http") {
    j["api_base"] = http.base_url;
    j["model"] = http.model;
    j["temperature"] = http.temperature;
    j["timeout_ms"] = http.timeout.count();
    j["max_attempts"] = http.max_attempts;
    j["backoff_ms"] = http.initial_backoff.count();
  }
  return j;
}

void apply_config(PipelineConfig& cfg, std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key = value", line_no);
    const auto key = trim(view.substr(0, eq));
    auto value = trim(view.substr(eq + 1));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
      value = value.substr(1, value.size() - 2);
    }
    try {
      cfg.set(key, value);
    } catch (const ContractViolation& e) {
      throw ParseError(e.what(), line_no);
    }
  }
}

void apply_config_file(PipelineConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file: " + path.string());
  apply_config(cfg, in);
}

std::unique_ptr<ReasonerBackend> make_backend(const PipelineConfig& cfg) {
  if (cfg.backend == "mock") return std::make_unique<MockReasoner>(cfg.mock_force_confidence);
  if (cfg.backend == "http") return std::make_unique<HttpReasoner>(cfg.http);
  throw ContractViolation("unknown backend '" + cfg.backend + "'");
}

namespace {

std::string path_key(const EvidenceInput& e) {
  std::string key = e.query_entity.value_or("");
  for (const auto& s : e.path.steps) key += '\t' + step_token(s);
  if (e.path.constraint) key += "\t|" + e.path.constraint->relation + '\t' + e.path.constraint->entity;
  return key;
}

}  // namespace

std::vector<EvidenceInput> select_top_k(std::vector<EvidenceInput> evidence, std::size_t k) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<EvidenceInput>> by_question;
  for (auto& e : evidence) {
    auto [it, inserted] = by_question.try_emplace(e.question_id);
    if (inserted) order.push_back(e.question_id);
    it->second.push_back(std::move(e));
  }
  std::vector<EvidenceInput> out;
  for (const auto& id : order) {
    auto& items = by_question[id];
    std::stable_sort(items.begin(), items.end(), [](const EvidenceInput& a, const EvidenceInput& b) {
      if (a.confidence != b.confidence) return a.confidence > b.confidence;
      return path_key(a) < path_key(b);
    });
    if (items.size() > k) items.resize(k);
    std::move(items.begin(), items.end(), std::back_inserter(out));
  }
  return out;
}

std::vector<EvidenceInput> as_evidence_inputs(const std::vector<EvidenceRecord>& records) {
  std::vector<EvidenceInput> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    out.push_back({r.question_id,
                   r.query_entity.empty() ? std::nullopt : std::optional<std::string>(r.query_entity), r.path,
                   r.confidence});
  }
  return out;
}

std::vector<PredictionRecord> run_inference(const KnowledgeGraph& g, const std::vector<QaItem>& qa,
                                            const std::vector<EvidenceInput>& evidence,
                                            const ReasonerBackend& backend, const PipelineConfig& cfg) {
  std::map<std::string, std::vector<const EvidenceInput*>> by_question;
  const auto selected = select_top_k(evidence, cfg.top_k);
  for (const auto& e : selected) by_question[e.question_id].push_back(&e);

  std::vector<PredictionRecord> predictions(qa.size());
  parallel_for(qa.size(), cfg.concurrency, [&](std::size_t i) {
    const auto& item = qa[i];
    std::vector<EvidenceItem> items;
    if (auto it = by_question.find(item.id); it != by_question.end()) {
      for (const auto* e : it->second) {
        const auto path = resolve(g, e->path);
        if (e->query_entity) {
          items.push_back({g.entity_or_unknown(*e->query_entity), path, e->confidence});
        } else {
          for (const auto& q : item.entities) items.push_back({g.entity_or_unknown(q), path, e->confidence});
        }
      }
    }
    const auto ctx = verbalize_evidence(g, item.question, items, cfg.max_context_lines);
    predictions[i] = infer(backend, ctx, cfg.uq, item.id, cfg.instruction);
  });
  return predictions;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

void mark_failed(const std::filesystem::path& out_dir, std::string_view stage, std::string_view message) {
  auto out = open_out(out_dir / kFailedMarker);
  out << stage << ": " << message << '\n';
}

}  // namespace

int run_pipeline(const PipelineConfig& cfg, const PipelinePaths& paths, std::ostream& log) {
  KnowledgeGraph g;
  std::vector<QaItem> qa;
  std::vector<EvidenceInput> external;
  try {
    cfg.validate();
    g = load_kg_file(paths.kg);
    qa = read_qa_file(paths.qa);
    if (paths.evidence) {
      for (const auto& j : read_jsonl_file(*paths.evidence)) {
        if (auto e = evidence_input_from_json(j)) external.push_back(std::move(*e));
      }
    }
  } catch (const std::exception& e) {
    log << "pipeline: input error: " << e.what() << '\n';
    return 2;
  }

  std::filesystem::create_directories(paths.out_dir);
  std::filesystem::remove(paths.out_dir / kFailedMarker);
  const auto& dir = paths.out_dir;

  std::string stage = "build";
  nlohmann::json report;
  try {
    SftBuildOptions build_opts{cfg.prior, cfg.search, cfg.stage, /*with_qa_records=*/false, cfg.concurrency};
    const auto dataset = build_sft_dataset(g, qa, build_opts);
    {
      auto out = open_out(dir / "evidence.jsonl");
      for (const auto& r : dataset.evidence) write_jsonl_line(out, r);
    }
    {
      auto out = open_out(dir / "sft.jsonl");
      for (const auto& r : dataset.records) write_jsonl_line(out, r);
    }
    nlohmann::json skipped = nlohmann::json::array();
    for (const auto& s : dataset.skipped) skipped.push_back({{"id", s.question_id}, {"reason", s.reason}});
    report["skipped"] = skipped;
    report["config"] = cfg.to_json();
    log << "pipeline: " << dataset.evidence.size() << " evidence records, " << dataset.records.size()
        << " sft records, " << dataset.skipped.size() << " questions skipped\n";

    stage = "infer";
    const auto backend = make_backend(cfg);
    const auto evidence = paths.evidence ? external : as_evidence_inputs(dataset.evidence);
    const auto predictions = run_inference(g, qa, evidence, *backend, cfg);
    {
      auto out = open_out(dir / "predictions.jsonl");
      for (const auto& p : predictions) write_jsonl_line(out, p);
    }

    stage = "evaluate";
    const auto gold = gold_answers(qa);
    try {
      const auto calibration = evaluate(predictions, gold, cfg.n_bins);
      report.update(nlohmann::json(calibration));
      auto csv = open_out(dir / "reliability.csv");
      write_reliability_csv(csv, calibration);
    } catch (const NoSamplesError& e) {
      const auto qa_scores = qa_accuracy(predictions, gold);
      report["n_questions"] = qa_scores.n_questions;
      report["n_samples"] = 0;
      report["hit"] = qa_scores.hit;
      report["recall"] = qa_scores.recall;
      report["macro_f1"] = qa_scores.macro_f1;
      report["ece"] = nullptr;
      report["error"] = e.what();
      auto out = open_out(dir / "report.json");
      out << report.dump(2) << '\n';
      throw;
    }
    auto out = open_out(dir / "report.json");
    out << report.dump(2) << '\n';
  } catch (const std::exception& e) {
    log << "pipeline: " << stage << " failed: " << e.what() << '\n';
    mark_failed(dir, stage, e.what());
    return 1;
  }
  return 0;
}

}  // namespace kgcal
