#include "kgcal/prompts.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <unordered_map>

#include <json.hpp>

#include "kgcal/errors.hpp"
#include "kgcal/log.hpp"

namespace kgcal {

std::string_view to_string(UqMethod method) {
  switch (method) {
    case UqMethod::vanilla: return "vanilla";
    case UqMethod::cot: return "cot";
    case UqMethod::self_probing: return "self-probing";
  }
  return "vanilla";
}

UqMethod parse_uq_method(std::string_view name) {
  if (name == "vanilla") return UqMethod::vanilla;
  if (name == "cot") return UqMethod::cot;
  if (name == "self-probing" || name == "self_probing") return UqMethod::self_probing;
  throw ContractViolation("unknown UQ method '" + std::string(name) + "'");
}

std::string format_context_confidence(double confidence) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", confidence);
  std::string s(buf);
  if (s.size() > 1 && s.back() == '0' && s[s.size() - 2] != '.') s.pop_back();
  return s;
}

std::string ContextLine::render() const {
  return walk + " [Confidence: " + format_context_confidence(confidence) + "]";
}

std::string EvidenceContext::render() const {
  std::string out;
  for (const auto& line : lines) {
    if (!out.empty()) out += '\n';
    out += line.render();
  }
  return out;
}

EvidenceContext verbalize_evidence(const KnowledgeGraph& g, std::string question,
                                   std::span<const EvidenceItem> evidence, std::size_t max_lines) {
  // Per-item walks are bounded well above the line cap so the global
  // ordering below decides which lines survive.
  constexpr std::size_t kWalksPerItem = 10000;

  std::unordered_map<std::string, double> best;
  for (const auto& item : evidence) {
    const auto walks = enumerate_walks(g, item.query_entity, item.path, kWalksPerItem);
    if (walks.empty()) log::info("evidence item grounds to no walk; no context lines");
    for (const auto& walk : walks) {
      std::string text = g.entity_name(walk[0]);
      for (std::size_t i = 0; i < item.path.steps.size(); ++i) {
        const auto& step = item.path.steps[i];
        text += " -> ";
        text += step_token({g.relation_name(step.relation), step.direction});
        text += " -> ";
        text += g.entity_name(walk[i + 1]);
      }
      auto [it, inserted] = best.emplace(std::move(text), item.confidence);
      if (!inserted) it->second = std::max(it->second, item.confidence);
    }
  }

  EvidenceContext ctx{std::move(question), {}};
  ctx.lines.reserve(best.size());
  for (auto& [walk, conf] : best) ctx.lines.push_back({walk, conf});
  std::sort(ctx.lines.begin(), ctx.lines.end(), [](const ContextLine& a, const ContextLine& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.walk < b.walk;
  });
  if (ctx.lines.size() > max_lines) ctx.lines.resize(max_lines);
  return ctx;
}

namespace {

constexpr std::string_view kConfidenceRequest =
    " Please answer the following questions and provide the confidence (0.0 to 1.0) for each answer "
    "being correct. Please keep the answer as simple as possible and return all the possible answers "
    "and their confidence as a json string.";
constexpr std::string_view kFormatExample =
    "Output format example: {<answer_1>: <confidence_1>,...,<answer_k>: <confidence_k>}";
constexpr std::string_view kStepByStep = "Let's think it step by step.";
constexpr std::string_view kListRequest =
    " Please answer the given question. Please keep the answer as simple as possible and return all "
    "the possible answers as a list.";
constexpr std::string_view kProbe =
    "Q: How likely are the above answers to be correct? Analyze the possible answers, provide your "
    "reasoning concisely, and give your confidence (0.0 to 1.0) for each answer being correct. Please "
    "keep the answer as simple as possible and return all the possible answers and their confidence "
    "as a json string.";

std::string join_blocks(std::initializer_list<std::string_view> blocks) {
  std::string out;
  for (auto b : blocks) {
    if (b.empty()) continue;
    if (!out.empty()) out += "\n\n";
    out += b;
  }
  return out;
}

}  // namespace

std::vector<std::string> render_prompt(const EvidenceContext& ctx, UqMethod method,
                                       std::string_view instruction) {
  const std::string context = ctx.render();
  const std::string question = "Question:\n" + ctx.question;
  switch (method) {
    case UqMethod::vanilla:
      return {join_blocks({std::string(instruction) + std::string(kConfidenceRequest), kFormatExample,
                           context, question})};
    case UqMethod::cot:
      return {join_blocks({std::string(instruction) + std::string(kConfidenceRequest), kFormatExample,
                           kStepByStep, context, question})};
    case UqMethod::self_probing:
      return {join_blocks({std::string(instruction) + std::string(kListRequest), context, question}),
              join_blocks({kProbe, kFormatExample})};
  }
  return {};
}

namespace {

constexpr std::string_view kWhitespace = " \t\r\n";

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(kWhitespace);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(kWhitespace) - b + 1);
}

std::string_view unquote(std::string_view s) {
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

std::optional<double> to_number(std::string_view s) {
  s = trim(unquote(trim(s)));
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

// Index one past the '}' matching the '{' at `open`, honoring quoted strings.
std::optional<std::size_t> matching_brace(std::string_view text, std::size_t open) {
  int depth = 0;
  char quote = 0;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (quote) {
      if (c == '\\') {
        ++i;
      } else if (c == quote) {
        quote = 0;
      }
      continue;
    }
    if (c == '"') {
      quote = c;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}' && --depth == 0) {
      return i + 1;
    }
  }
  return std::nullopt;
}

std::optional<AnswerMap> strict_object(std::string_view candidate) {
  const auto j = nlohmann::json::parse(candidate, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  AnswerMap out;
  for (const auto& [key, value] : j.items()) {
    std::optional<double> v;
    if (value.is_number()) {
      v = value.get<double>();
    } else if (value.is_string()) {
      v = to_number(value.get<std::string>());
    }
    if (!v) return std::nullopt;
    out[key] = *v;
  }
  return out;
}

// {Connecticut: 0.3, 'New Haven': 0.8}. Keys may contain commas, so each
// entry ends at the first ':' that is followed by a number and then a comma
// or the end of the object.
std::optional<AnswerMap> relaxed_object(std::string_view candidate) {
  const std::string_view body = candidate.substr(1, candidate.size() - 2);
  AnswerMap out;
  std::size_t start = 0;
  while (!trim(body.substr(start)).empty()) {
    bool matched = false;
    for (auto colon = body.find(':', start); colon != std::string_view::npos; colon = body.find(':', colon + 1)) {
      auto value_end = body.find(',', colon + 1);
      if (value_end == std::string_view::npos) value_end = body.size();
      const auto value = to_number(body.substr(colon + 1, value_end - colon - 1));
      if (!value) continue;
      const std::string_view key = trim(unquote(trim(body.substr(start, colon - start))));
      if (key.empty() || key.find_first_of("{}<>") != std::string_view::npos) return std::nullopt;
      out[std::string(key)] = *value;
      start = value_end == body.size() ? body.size() : value_end + 1;
      matched = true;
      break;
    }
    if (!matched) return std::nullopt;
  }
  return out;
}

}  // namespace

AnswerMap parse_prediction(std::string_view response) {
  for (auto open = response.find('{'); open != std::string_view::npos; open = response.find('{', open + 1)) {
    const auto end = matching_brace(response, open);
    if (!end) continue;
    const auto candidate = response.substr(open, *end - open);
    auto parsed = strict_object(candidate);
    if (!parsed) parsed = relaxed_object(candidate);
    if (!parsed) continue;
    for (auto& [_, conf] : *parsed) conf = std::clamp(conf, 0.0, 1.0);
    return std::move(*parsed);
  }
  throw ParseFailure(std::string(response));
}

std::string render_answer_map(const AnswerMap& answers) {
  std::vector<std::pair<std::string, double>> ordered(answers.begin(), answers.end());
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::string out = "{";
  for (const auto& [name, conf] : ordered) {
    if (out.size() > 1) out += ", ";
    out += nlohmann::json(name).dump();
    out += ": ";
    out += nlohmann::json(conf).dump();
  }
  out += '}';
  return out;
}

}  // namespace kgcal
