#include "kgcal/proxy_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>

#include "kgcal/errors.hpp"
#include "kgcal/log.hpp"
#include "kgcal/parallel.hpp"

namespace kgcal {
namespace {

constexpr std::string_view kOpen = "<PATH";
constexpr std::string_view kClose = "</PATH>";
constexpr std::string_view kSep = "<SEP>";
constexpr std::string_view kConstraintOpen = "<CONSTRAINT>";
constexpr std::string_view kConstraintClose = "</CONSTRAINT>";
constexpr std::string_view kWhitespace = " \t\r\n";

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(kWhitespace);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(kWhitespace);
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_sep(std::string_view s) {
  std::vector<std::string_view> parts;
  while (true) {
    const auto at = s.find(kSep);
    parts.push_back(trim(s.substr(0, at)));
    if (at == std::string_view::npos) break;
    s.remove_prefix(at + kSep.size());
  }
  return parts;
}

void check_token(std::string_view token) {
  if (token.empty()) throw SerializationError("empty name in evidence path");
  if (trim(token) != token) throw SerializationError("name has surrounding whitespace: '" + std::string(token) + "'");
  for (auto reserved : {kSep, kConstraintOpen, kConstraintClose, kClose, kOpen}) {
    if (token.find(reserved) != std::string_view::npos) {
      throw SerializationError("name contains a grammar terminal: '" + std::string(token) + "'");
    }
  }
}

}  // namespace

std::string format_confidence(double confidence) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", confidence);
  return buf;
}

std::string serialize_evidence(const NamedPath& path, double confidence) {
  if (path.steps.empty()) throw SerializationError("length-0 evidence cannot be serialized");
  if (!(confidence >= 0.0 && confidence <= 1.0)) {
    throw SerializationError("confidence outside [0,1]");
  }

  std::string out = "<PATH confidence=";
  out += format_confidence(confidence);
  out += '>';
  for (std::size_t i = 0; i < path.steps.size(); ++i) {
    const auto token = step_token(path.steps[i]);
    check_token(path.steps[i].relation);
    if (path.steps[i].direction == Direction::forward && token.front() == '~') {
      throw SerializationError("forward relation name may not start with '~': '" + token + "'");
    }
    if (i > 0) out += kSep;
    out += token;
  }
  if (path.constraint) {
    check_token(path.constraint->relation);
    check_token(path.constraint->entity);
    out += kConstraintOpen;
    out += path.constraint->relation;
    out += kSep;
    out += path.constraint->entity;
    out += kConstraintClose;
  }
  out += kClose;
  return out;
}

ParsedEvidence parse_evidence(std::string_view text) {
  const auto open = text.find(kOpen);
  if (open == std::string_view::npos) throw InvalidOutput("missing <PATH> tag");

  std::string_view rest = text.substr(open + kOpen.size());
  const auto gt = rest.find('>');
  if (gt == std::string_view::npos) throw InvalidOutput("unterminated <PATH ...> tag");
  std::string_view attr = trim(rest.substr(0, gt));
  rest.remove_prefix(gt + 1);

  constexpr std::string_view kAttr = "confidence";
  if (!attr.starts_with(kAttr)) throw InvalidOutput("missing confidence attribute");
  attr = trim(attr.substr(kAttr.size()));
  if (attr.empty() || attr.front() != '=') throw InvalidOutput("missing confidence attribute");
  attr = trim(attr.substr(1));
  if (attr.size() >= 2 && (attr.front() == '"' || attr.front() == '\'') && attr.back() == attr.front()) {
    attr = trim(attr.substr(1, attr.size() - 2));
  }

  ParsedEvidence parsed;
  const auto [ptr, ec] = std::from_chars(attr.data(), attr.data() + attr.size(), parsed.confidence);
  if (ec != std::errc{} || ptr != attr.data() + attr.size() || attr.empty()) {
    throw InvalidOutput("unparseable confidence '" + std::string(attr) + "'");
  }
  if (!(parsed.confidence >= 0.0 && parsed.confidence <= 1.0)) {
    throw InvalidOutput("confidence outside [0,1]");
  }

  const auto close = rest.find(kClose);
  if (close == std::string_view::npos) throw InvalidOutput("unclosed <PATH> block");
  std::string_view body = rest.substr(0, close);
  if (body.find(kOpen) != std::string_view::npos) throw InvalidOutput("nested <PATH> tag");

  std::string_view relations = body;
  if (const auto c_open = body.find(kConstraintOpen); c_open != std::string_view::npos) {
    relations = body.substr(0, c_open);
    std::string_view tail = body.substr(c_open + kConstraintOpen.size());
    const auto c_close = tail.find(kConstraintClose);
    if (c_close == std::string_view::npos) throw InvalidOutput("unclosed <CONSTRAINT> block");
    if (!trim(tail.substr(c_close + kConstraintClose.size())).empty()) {
      throw InvalidOutput("text between </CONSTRAINT> and </PATH>");
    }
    const auto parts = split_sep(tail.substr(0, c_close));
    if (parts.size() != 2 || parts[0].empty() || parts[1].empty()) {
      throw InvalidOutput("constraint must be relation<SEP>entity");
    }
    parsed.path.constraint = NamedConstraint{std::string(parts[0]), std::string(parts[1])};
  } else if (body.find(kConstraintClose) != std::string_view::npos) {
    throw InvalidOutput("</CONSTRAINT> without <CONSTRAINT>");
  }

  for (auto token : split_sep(relations)) {
    if (token.empty()) throw InvalidOutput("empty relation in path");
    parsed.path.steps.push_back(parse_step_token(token));
  }
  return parsed;
}

std::string proxy_instruction(Stage stage, std::string_view question) {
  std::string out = stage == Stage::sft
                        ? "Please generate a valid relation path that can be helpful for answering the following question: "
                        : "Please generate an enhanced relation path with well-calibrated confidence that can be "
                          "helpful for answering the following question: ";
  out += question;
  return out;
}

namespace {

struct QuestionOutput {
  std::vector<SftRecord> records;
  std::vector<EvidenceRecord> evidence;
  std::vector<ConstraintDecision> decisions;
  std::optional<SkipEntry> skipped;
};

std::vector<std::string> entity_names(const KnowledgeGraph& g, std::span<const EntityId> ids) {
  std::vector<std::string> names;
  names.reserve(ids.size());
  for (EntityId id : ids) names.push_back(g.entity_name(id));
  return names;
}

QuestionOutput build_question(const KnowledgeGraph& g, const QaItem& item, const SftBuildOptions& options) {
  QuestionOutput out;
  const auto skip = [&](std::string reason) {
    out.skipped = SkipEntry{item.id, std::move(reason)};
    return out;
  };
  if (item.answers.empty()) return skip("no gold answers");

  std::vector<EntityId> answers;
  for (const auto& a : item.answers) {
    if (auto id = g.find_entity(a)) answers.push_back(*id);
  }
  answers = sorted_unique(std::move(answers));
  const std::size_t n_gold = std::set<std::string>(item.answers.begin(), item.answers.end()).size();

  bool cap_hit = false;
  std::size_t n_paths = 0;
  std::set<std::string> emitted;
  const auto emit = [&](EntityId q, const ConstrainedPath& path, const GroundingResult& grounding,
                        double confidence) {
    const NamedPath named = to_named(g, path);
    auto target = serialize_evidence(named, confidence);
    if (!emitted.insert(g.entity_name(q) + '\n' + target).second) return;
    out.records.push_back({proxy_instruction(options.stage, item.question), std::move(target), item.id});
    out.evidence.push_back({item.id, g.entity_name(q), named, confidence, entity_names(g, grounding.candidates),
                            set_f1(intersection_size(grounding.candidates, answers),
                                   grounding.candidates.size(), n_gold)});
  };

  for (const auto& name : item.entities) {
    const auto q = g.find_entity(name);
    if (!q) {
      log::warn("question " + item.id + ": query entity '" + name + "' not in graph");
      continue;
    }
    std::set<ConstrainedPath> paths;
    for (EntityId a : answers) {
      try {
        for (auto& p : enumerate_shortest_paths(g, *q, a, options.search)) {
          if (p.length() > 0) paths.insert(std::move(p));
        }
      } catch (const ResourceLimitError& e) {
        cap_hit = true;
        log::warn("question " + item.id + ": " + e.what());
      }
    }
    n_paths += paths.size();

    for (const auto& base : paths) {
      const auto grounding = ground(g, *q, base);
      const double base_conf = evidence_confidence(options.prior, grounding.candidates, answers);
      emit(*q, base, grounding, base_conf);

      for (const auto& c : mine_constraints(g, base, grounding.candidates, answers)) {
        ConstrainedPath constrained = base;
        constrained.constraint = c;
        const auto cg = ground(g, *q, constrained);
        const double conf = evidence_confidence(options.prior, cg.candidates, answers);
        const bool keep = conf > base_conf;
        out.decisions.push_back({item.id, g.entity_name(*q), to_named(g, base),
                                 {g.relation_name(c.relation), g.entity_name(c.entity)}, base_conf, conf, keep});
        if (keep) emit(*q, constrained, cg, conf);
      }
    }
  }

  if (n_paths == 0) {
    return skip(cap_hit ? "shortest-path count exceeds max_paths"
                        : "no path within max_depth=" + std::to_string(options.search.max_depth));
  }
  if (options.with_qa_records) {
    std::string joined;
    for (const auto& a : item.answers) {
      if (!joined.empty()) joined += kSep;
      joined += a;
    }
    out.records.push_back({"Please answer the following question: " + item.question, joined, item.id});
  }
  return out;
}

}  // namespace

SftDataset build_sft_dataset(const KnowledgeGraph& g, std::span<const QaItem> qa, const SftBuildOptions& options) {
  if (options.search.max_depth < 1) throw ContractViolation("max_depth must be at least 1");

  std::vector<QuestionOutput> per_question(qa.size());
  parallel_for(qa.size(), options.concurrency,
               [&](std::size_t i) { per_question[i] = build_question(g, qa[i], options); });

  SftDataset dataset;
  for (auto& q : per_question) {
    std::move(q.records.begin(), q.records.end(), std::back_inserter(dataset.records));
    std::move(q.evidence.begin(), q.evidence.end(), std::back_inserter(dataset.evidence));
    std::move(q.decisions.begin(), q.decisions.end(), std::back_inserter(dataset.decisions));
    if (q.skipped) dataset.skipped.push_back(std::move(*q.skipped));
  }
  return dataset;
}

}  // namespace kgcal
