#pragma once

// Reasoner backends: a deterministic offline mock and an HTTP client for
// OpenAI-compatible chat-completion endpoints.

#include <chrono>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgcal/prompts.hpp"

namespace kgcal {

struct ChatMessage {
  std::string role;  // "user" or "assistant"
  std::string content;
};

class ReasonerBackend {
 public:
  virtual ~ReasonerBackend() = default;
  // Must be safe to call concurrently.
  virtual std::string complete(std::span<const ChatMessage> conversation) const = 0;
};

// Reads the "... -> answer [Confidence: c]" lines out of the conversation and
// answers with every walk endpoint, each at the highest confidence of the
// lines reaching it. Asked for a plain list (self-probing round one) it
// returns a JSON array of the same answers.
class MockReasoner final : public ReasonerBackend {
 public:
  MockReasoner() = default;
  // Reports every answer at this confidence instead.
  explicit MockReasoner(std::optional<double> forced_confidence) : forced_(forced_confidence) {}

  std::string complete(std::span<const ChatMessage> conversation) const override;

  static AnswerMap answers_from_context(std::string_view text);

 private:
  std::optional<double> forced_;
};

struct HttpReasonerConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key;
  std::string model = "gpt-3.5-turbo";
  double temperature = 0.0;
  std::chrono::milliseconds timeout{60000};
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};
  double backoff_multiplier = 2.0;

  // Overrides from KGCAL_API_BASE, KGCAL_API_KEY (or OPENAI_API_KEY) and KGCAL_MODEL.
  static HttpReasonerConfig from_env();
};

class HttpReasoner final : public ReasonerBackend {
 public:
  explicit HttpReasoner(HttpReasonerConfig config);

  // Connection failures, timeouts, 429 and 5xx are retried with exponential
  // backoff; anything else, or running out of attempts, throws TransportError.
  std::string complete(std::span<const ChatMessage> conversation) const override;

  const HttpReasonerConfig& config() const noexcept { return config_; }

 private:
  HttpReasonerConfig config_;
  std::string host_;    // scheme://host[:port]
  std::string prefix_;  // path before /chat/completions
};

// One round for vanilla/CoT, two chained rounds for self-probing. Transport
// errors propagate; an unparseable final response yields an empty answer map
// with parse_failed set.
PredictionRecord infer(const ReasonerBackend& backend, const EvidenceContext& ctx, UqMethod method,
                       std::string question_id, std::string_view instruction = kDefaultInstruction);

}  // namespace kgcal
