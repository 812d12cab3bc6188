#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace schemaprobe {

struct GenerationParams {
  double temperature = 0.0;
  std::int64_t seed = 42;
  int max_tokens = 10000;

  bool operator==(const GenerationParams&) const = default;
};

struct ModelTarget {
  std::string model_id;
  std::string provider_label;
  int tier = 1;  // 1 = locally hosted, 2 = provider API
  std::string endpoint_url;
  std::string auth_ref;  // name of the environment variable holding the key
  GenerationParams params;
};

struct Endpoint {
  std::string scheme;  // "http" or "https"
  std::string host;
  int port = 0;
  std::string path;
};

// Throws Error("InvalidEndpoint") for anything but http(s)://host[:port]/path.
Endpoint parse_endpoint(std::string_view url);

// Empty when the target is usable.
std::optional<std::string> target_problem(const ModelTarget& t);

enum class FinishReason { Stop, Length, ContentFilter, Error };

std::string_view to_string(FinishReason r);
std::optional<FinishReason> parse_finish_reason(std::string_view s);

struct ModelResponse {
  std::string text;
  FinishReason finish_reason = FinishReason::Stop;
  double latency_ms = 0.0;
  int attempt_count = 0;
  int raw_status = 0;
};

enum class TransportOutcome { Ok, ProviderBlocked, Failed };

std::string_view to_string(TransportOutcome o);
std::optional<TransportOutcome> parse_outcome(std::string_view s);

// stop/length -> Ok, content-filter -> ProviderBlocked, error -> Failed.
TransportOutcome classify_outcome(const ModelResponse& r);

// Chat-completions body: model, one user message, temperature, seed,
// max_tokens, in that key order.
std::string build_request_body(const ModelTarget& target, std::string_view prompt_text);

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds base_delay{1000};
  double backoff_factor = 2.0;

  // Delay before attempt `attempt` (2-based; attempt 1 never waits).
  std::chrono::milliseconds delay_before(int attempt) const;
};

struct ClientOptions {
  RetryPolicy retry;
  std::chrono::seconds connect_timeout{10};
  std::chrono::seconds read_timeout{600};
  std::function<void(std::chrono::milliseconds)> sleep;           // defaults to this_thread::sleep_for
  std::function<std::optional<std::string>(const std::string&)> env;  // defaults to getenv
};

/// Single-turn chat-completion transport shared by attack targets, the
/// judge, and the guard model. Stateless between calls and safe to use
/// from many threads.
class ChatClient {
 public:
  explicit ChatClient(ClientOptions options = {});

  /// One user message per attempt, identical bytes on every retry. Retries
  /// timeouts, connection failures, 429 and 5xx. Throws AuthError,
  /// TransportError (retries exhausted or non-retryable status),
  /// ProtocolError (unreadable reply).
  ModelResponse send_single_turn(const ModelTarget& target, std::string_view prompt_text) const;

  const ClientOptions& options() const { return options_; }

 private:
  ClientOptions options_;
};

}  // namespace schemaprobe
