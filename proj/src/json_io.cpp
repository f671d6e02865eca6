#include "kgcal/json_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "kgcal/errors.hpp"
#include "kgcal/log.hpp"

namespace kgcal {

using nlohmann::json;

void to_json(json& j, const NamedPath& path) {
  json relations = json::array();
  for (const auto& s : path.steps) relations.push_back(step_token(s));
  j = json{{"relations", relations}, {"constraint", nullptr}};
  if (path.constraint) {
    j["constraint"] = {{"relation", path.constraint->relation}, {"entity", path.constraint->entity}};
  }
}

void from_json(const json& j, NamedPath& path) {
  path = {};
  for (const auto& r : j.at("relations")) path.steps.push_back(parse_step_token(r.get<std::string>()));
  if (auto c = j.find("constraint"); c != j.end() && !c->is_null()) {
    path.constraint = NamedConstraint{c->at("relation").get<std::string>(), c->at("entity").get<std::string>()};
  }
}

std::string id_from_json(const json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_number_integer()) return std::to_string(value.get<long long>());
  throw json::type_error::create(302, "id must be a string or integer", &value);
}

void to_json(json& j, const EvidenceRecord& r) {
  j = json{{"id", r.question_id}, {"entity", r.query_entity}, {"path", r.path}};
  try {
    j["output"] = serialize_evidence(r.path, r.confidence);
  } catch (const SerializationError&) {
    j["output"] = nullptr;
  }
  j["confidence"] = r.confidence;
  j["grounded"] = r.grounded;
  j["f1"] = r.f1;
}

void from_json(const json& j, EvidenceRecord& r) {
  r.question_id = id_from_json(j.at("id"));
  r.query_entity = j.value("entity", std::string{});
  r.path = j.at("path").get<NamedPath>();
  r.confidence = j.at("confidence").get<double>();
  r.grounded = j.value("grounded", std::vector<std::string>{});
  r.f1 = j.at("f1").get<double>();
  if (!(r.confidence >= 0.0 && r.confidence <= 1.0) || !(r.f1 >= 0.0 && r.f1 <= 1.0)) {
    throw ContractViolation("evidence record " + r.question_id + ": confidence and f1 must lie in [0,1]");
  }
}

void to_json(json& j, const QaItem& item) {
  j = json{{"id", item.id}, {"question", item.question}, {"entities", item.entities}, {"answers", item.answers}};
}

void from_json(const json& j, QaItem& item) {
  item.id = id_from_json(j.at("id"));
  item.question = j.at("question").get<std::string>();
  item.entities = j.at("entities").get<std::vector<std::string>>();
  item.answers = j.at("answers").get<std::vector<std::string>>();
}

void to_json(json& j, const SftRecord& r) {
  j = json{{"instruction", r.instruction}, {"output", r.target}, {"id", r.question_id}};
}

void to_json(json& j, const PredictionRecord& r) {
  json answers = json::object();
  for (const auto& [a, c] : r.answers) answers[a] = c;
  j = json{{"id", r.question_id},
           {"answers", answers},
           {"raw_response", r.raw_response},
           {"uq", std::string(to_string(r.method))},
           {"parse_failed", r.parse_failed}};
  if (r.first_round_response) j["first_round_response"] = *r.first_round_response;
}

void from_json(const json& j, PredictionRecord& r) {
  r = {};
  r.question_id = id_from_json(j.at("id"));
  for (const auto& [a, c] : j.at("answers").items()) r.answers[a] = c.get<double>();
  r.raw_response = j.value("raw_response", std::string{});
  r.method = parse_uq_method(j.value("uq", std::string("vanilla")));
  r.parse_failed = j.value("parse_failed", false);
  if (auto f = j.find("first_round_response"); f != j.end()) r.first_round_response = f->get<std::string>();
  for (const auto& [a, c] : r.answers) {
    if (!(c >= 0.0 && c <= 1.0)) throw ContractViolation("prediction " + r.question_id + ": confidence outside [0,1]");
  }
}

void to_json(json& j, const RewardBreakdown& r) {
  j = json{{"match", r.match},
           {"r_inf", r.r_inf},
           {"r_cal", r.r_cal},
           {"target_confidence", r.target_confidence},
           {"combined", r.combined},
           {"smoothed", r.smoothed},
           {"best_gold_index", r.best_gold_index},
           {"valid", r.valid}};
}

void to_json(json& j, const ConstraintDecision& d) {
  j = json{{"id", d.question_id},
           {"entity", d.query_entity},
           {"base", d.base},
           {"constraint", {{"relation", d.constraint.relation}, {"entity", d.constraint.entity}}},
           {"base_confidence", d.base_confidence},
           {"constrained_confidence", d.constrained_confidence},
           {"retained", d.retained}};
}

void to_json(json& j, const CalibrationReport& report) {
  json bins = json::array();
  for (const auto& b : report.bins) {
    bins.push_back({{"lower", b.lower},
                    {"upper", b.upper},
                    {"count", b.count},
                    {"mean_confidence", b.mean_confidence},
                    {"accuracy", b.accuracy}});
  }
  j = json{{"n_questions", report.n_questions},
           {"n_samples", report.n_samples},
           {"hit", report.hit},
           {"recall", report.recall},
           {"macro_f1", report.macro_f1},
           {"ece", report.ece},
           {"parse_failures", report.parse_failures},
           {"bins", bins}};
}

std::vector<json> read_jsonl(std::istream& in) {
  std::vector<json> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) throw ParseError("invalid JSON", line_no);
    out.push_back(std::move(j));
  }
  return out;
}

std::vector<json> read_jsonl_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return read_jsonl(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_jsonl_line(std::ostream& out, const json& value) { out << value.dump() << '\n'; }

std::vector<QaItem> read_qa(std::istream& in) {
  std::vector<QaItem> items;
  std::size_t index = 0;
  for (const auto& j : read_jsonl(in)) {
    ++index;
    try {
      items.push_back(j.get<QaItem>());
    } catch (const json::exception& e) {
      throw ParseError("QA record " + std::to_string(index) + ": " + e.what());
    }
  }
  return items;
}

std::vector<QaItem> read_qa_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open QA file: " + path.string());
  return read_qa(in);
}

GoldAnswers gold_answers(const std::vector<QaItem>& qa) {
  GoldAnswers gold;
  for (const auto& item : qa) gold[item.id] = item.answers;
  return gold;
}

std::optional<EvidenceInput> evidence_input_from_json(const json& j) {
  EvidenceInput in;
  in.question_id = id_from_json(j.at("id"));
  if (auto e = j.find("entity"); e != j.end() && e->is_string() && !e->get<std::string>().empty()) {
    in.query_entity = e->get<std::string>();
  }
  if (j.contains("path")) {
    in.path = j.at("path").get<NamedPath>();
    in.confidence = j.at("confidence").get<double>();
    if (!(in.confidence >= 0.0 && in.confidence <= 1.0)) {
      throw ContractViolation("evidence for " + in.question_id + ": confidence outside [0,1]");
    }
    return in;
  }
  try {
    auto parsed = parse_evidence(j.at("output").get<std::string>());
    in.path = std::move(parsed.path);
    in.confidence = parsed.confidence;
    return in;
  } catch (const InvalidOutput& e) {
    log::warn("evidence for question " + in.question_id + " dropped: " + e.what());
    return std::nullopt;
  }
}

}  // namespace kgcal
