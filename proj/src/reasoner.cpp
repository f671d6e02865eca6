#include "kgcal/reasoner.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "kgcal/errors.hpp"
#include "kgcal/log.hpp"

namespace kgcal {

namespace {

constexpr std::string_view kConfidenceTag = " [Confidence: ";
constexpr std::string_view kArrow = " -> ";
constexpr std::string_view kListMarker = "return all the possible answers as a list.";

}  // namespace

AnswerMap MockReasoner::answers_from_context(std::string_view text) {
  AnswerMap answers;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    const auto tag = line.rfind(kConfidenceTag);
    if (tag == std::string_view::npos || !line.ends_with("]")) continue;
    const auto walk = line.substr(0, tag);
    const auto number = line.substr(tag + kConfidenceTag.size(), line.size() - tag - kConfidenceTag.size() - 1);
    double conf = 0.0;
    const auto [ptr, ec] = std::from_chars(number.data(), number.data() + number.size(), conf);
    if (ec != std::errc{} || ptr != number.data() + number.size()) continue;

    const auto arrow = walk.rfind(kArrow);
    const std::string answer(arrow == std::string_view::npos ? walk : walk.substr(arrow + kArrow.size()));
    auto [it, inserted] = answers.emplace(answer, conf);
    if (!inserted) it->second = std::max(it->second, conf);
  }
  return answers;
}

std::string MockReasoner::complete(std::span<const ChatMessage> conversation) const {
  std::string context;
  for (const auto& m : conversation) {
    if (m.role == "user") context += m.content + '\n';
  }
  AnswerMap answers = answers_from_context(context);
  if (forced_) {
    for (auto& [_, conf] : answers) conf = *forced_;
  }

  const bool wants_list = !conversation.empty() &&
                          conversation.back().content.find(kListMarker) != std::string::npos;
  if (!wants_list) return render_answer_map(answers);

  std::vector<std::pair<std::string, double>> ordered(answers.begin(), answers.end());
  std::stable_sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  nlohmann::json list = nlohmann::json::array();
  for (const auto& [name, _] : ordered) list.push_back(name);
  return list.dump();
}

HttpReasonerConfig HttpReasonerConfig::from_env() {
  HttpReasonerConfig cfg;
  if (const char* v = std::getenv("KGCAL_API_BASE"); v && *v) cfg.base_url = v;
  if (const char* v = std::getenv("KGCAL_API_KEY"); v && *v) {
    cfg.api_key = v;
  } else if (const char* o = std::getenv("OPENAI_API_KEY"); o && *o) {
    cfg.api_key = o;
  }
  if (const char* v = std::getenv("KGCAL_MODEL"); v && *v) cfg.model = v;
  return cfg;
}

HttpReasoner::HttpReasoner(HttpReasonerConfig config) : config_(std::move(config)) {
  if (config_.max_attempts < 1) throw ContractViolation("max_attempts must be at least 1");
  const auto scheme = config_.base_url.find("://");
  if (scheme == std::string::npos) throw ContractViolation("base URL needs a scheme: " + config_.base_url);
  const auto slash = config_.base_url.find('/', scheme + 3);
  host_ = config_.base_url.substr(0, slash);
  prefix_ = slash == std::string::npos ? "" : config_.base_url.substr(slash);
  while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
}

std::string HttpReasoner::complete(std::span<const ChatMessage> conversation) const {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : conversation) messages.push_back({{"role", m.role}, {"content", m.content}});
  const nlohmann::json body = {
      {"model", config_.model}, {"messages", messages}, {"temperature", config_.temperature}};
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  auto backoff = config_.initial_backoff;
  std::string last_error;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    if (attempt > 1) {
      log::warn("reasoner request failed (" + last_error + "); retry " + std::to_string(attempt) + "/" +
                std::to_string(config_.max_attempts));
      std::this_thread::sleep_for(backoff);
      backoff = std::chrono::milliseconds(
          static_cast<long long>(static_cast<double>(backoff.count()) * config_.backoff_multiplier));
    }

    httplib::Client client(host_);
    const auto secs = config_.timeout.count() / 1000;
    const auto usecs = (config_.timeout.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    const auto res = client.Post(prefix_ + "/chat/completions", headers, payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw TransportError("chat completion request rejected: HTTP " + std::to_string(res->status) + ": " +
                           res->body);
    }

    const auto reply = nlohmann::json::parse(res->body, nullptr, /*allow_exceptions=*/false);
    if (reply.is_discarded()) throw TransportError("chat completion response is not JSON");
    try {
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw TransportError("chat completion response has no choices[0].message.content");
    }
  }
  throw TransportError("chat completion failed after " + std::to_string(config_.max_attempts) +
                       " attempts: " + last_error);
}

PredictionRecord infer(const ReasonerBackend& backend, const EvidenceContext& ctx, UqMethod method,
                       std::string question_id, std::string_view instruction) {
  const auto prompts = render_prompt(ctx, method, instruction);
  std::vector<ChatMessage> conversation{{"user", prompts.front()}};

  PredictionRecord record;
  record.question_id = std::move(question_id);
  record.method = method;
  record.raw_response = backend.complete(conversation);
  if (method == UqMethod::self_probing) {
    conversation.push_back({"assistant", record.raw_response});
    conversation.push_back({"user", prompts.at(1)});
    record.first_round_response = std::move(record.raw_response);
    record.raw_response = backend.complete(conversation);
  }

  try {
    record.answers = parse_prediction(record.raw_response);
  } catch (const ParseFailure&) {
    record.parse_failed = true;
    log::warn("question " + record.question_id + ": no answer/confidence object in reasoner response");
  }
  return record;
}

}  // namespace kgcal
