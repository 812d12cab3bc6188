#include "schemaprobe/llm_client.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include <nlohmann/json.hpp>

#include "http.hpp"
#include "schemaprobe/error.hpp"

namespace schemaprobe {

using ojson = nlohmann::ordered_json;

Endpoint parse_endpoint(std::string_view url) {
  Endpoint ep;
  auto sep = url.find("://");
  if (sep == std::string_view::npos) throw Error("InvalidEndpoint", "missing scheme in " + std::string(url));
  ep.scheme = std::string(url.substr(0, sep));
  if (ep.scheme != "http" && ep.scheme != "https") {
    throw Error("InvalidEndpoint", "unsupported scheme in " + std::string(url));
  }
  auto rest = url.substr(sep + 3);
  auto slash = rest.find('/');
  auto authority = rest.substr(0, slash);
  ep.path = slash == std::string_view::npos ? "/" : std::string(rest.substr(slash));
  ep.port = ep.scheme == "https" ? 443 : 80;
  if (auto colon = authority.rfind(':'); colon != std::string_view::npos && authority.find(']') == std::string_view::npos) {
    auto port_text = std::string(authority.substr(colon + 1));
    char* end = nullptr;
    long port = std::strtol(port_text.c_str(), &end, 10);
    if (port_text.empty() || *end != '\0' || port <= 0 || port > 65535) {
      throw Error("InvalidEndpoint", "bad port in " + std::string(url));
    }
    ep.port = static_cast<int>(port);
    authority = authority.substr(0, colon);
  }
  ep.host = std::string(authority);
  if (ep.host.empty()) throw Error("InvalidEndpoint", "missing host in " + std::string(url));
  return ep;
}

std::optional<std::string> target_problem(const ModelTarget& t) {
  if (t.model_id.empty()) return "model_id is empty";
  if (t.tier != 1 && t.tier != 2) return "tier must be 1 or 2";
  if (t.params.temperature < 0.0 || !std::isfinite(t.params.temperature)) return "temperature must be >= 0";
  if (t.params.max_tokens < 1) return "max_tokens must be positive";
  try {
    parse_endpoint(t.endpoint_url);
  } catch (const Error& e) {
    return std::string(e.what());
  }
  return std::nullopt;
}

std::string_view to_string(FinishReason r) {
  switch (r) {
    case FinishReason::Stop: return "stop";
    case FinishReason::Length: return "length";
    case FinishReason::ContentFilter: return "content-filter";
    case FinishReason::Error: return "error";
  }
  return "error";
}

std::optional<FinishReason> parse_finish_reason(std::string_view s) {
  if (s == "stop") return FinishReason::Stop;
  if (s == "length") return FinishReason::Length;
  if (s == "content-filter" || s == "content_filter") return FinishReason::ContentFilter;
  if (s == "error") return FinishReason::Error;
  return std::nullopt;
}

std::string_view to_string(TransportOutcome o) {
  switch (o) {
    case TransportOutcome::Ok: return "ok";
    case TransportOutcome::ProviderBlocked: return "provider_blocked";
    case TransportOutcome::Failed: return "failed";
  }
  return "failed";
}

std::optional<TransportOutcome> parse_outcome(std::string_view s) {
  if (s == "ok") return TransportOutcome::Ok;
  if (s == "provider_blocked") return TransportOutcome::ProviderBlocked;
  if (s == "failed") return TransportOutcome::Failed;
  return std::nullopt;
}

TransportOutcome classify_outcome(const ModelResponse& r) {
  switch (r.finish_reason) {
    case FinishReason::Stop:
    case FinishReason::Length: return TransportOutcome::Ok;
    case FinishReason::ContentFilter: return TransportOutcome::ProviderBlocked;
    case FinishReason::Error: return TransportOutcome::Failed;
  }
  return TransportOutcome::Failed;
}

std::string build_request_body(const ModelTarget& target, std::string_view prompt_text) {
  ojson body;
  body["model"] = target.model_id;
  body["messages"] = ojson::array({{{"role", "user"}, {"content", std::string(prompt_text)}}});
  body["temperature"] = target.params.temperature;
  body["seed"] = target.params.seed;
  body["max_tokens"] = target.params.max_tokens;
  return body.dump();
}

std::chrono::milliseconds RetryPolicy::delay_before(int attempt) const {
  if (attempt <= 1) return std::chrono::milliseconds{0};
  double scale = std::pow(backoff_factor, attempt - 2);
  return std::chrono::milliseconds{static_cast<std::int64_t>(static_cast<double>(base_delay.count()) * scale)};
}

namespace {

bool retryable_status(int status) { return status == 429 || status >= 500; }

bool mentions_content_filter(const std::string& body) {
  try {
    auto doc = ojson::parse(body);
    if (doc.contains("error") && doc["error"].is_object()) {
      const auto& err = doc["error"];
      for (const char* key : {"code", "type"}) {
        if (err.contains(key) && err[key].is_string()) {
          auto v = err[key].get<std::string>();
          if (v == "content_filter" || v == "content_policy_violation") return true;
        }
      }
    }
  } catch (const ojson::exception&) {
  }
  return false;
}

ModelResponse parse_completion(const std::string& body, int status) {
  ojson doc;
  try {
    doc = ojson::parse(body);
  } catch (const ojson::parse_error& e) {
    throw ProtocolError(std::string("reply is not JSON: ") + e.what());
  }
  if (!doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty()) {
    throw ProtocolError("reply has no choices");
  }
  const auto& choice = doc["choices"][0];
  ModelResponse r;
  r.raw_status = status;
  if (choice.contains("message") && choice["message"].is_object()) {
    const auto& content = choice["message"]["content"];
    if (content.is_string()) r.text = content.get<std::string>();
    else if (!content.is_null()) throw ProtocolError("message content is not a string");
  }
  std::string reason = choice.contains("finish_reason") && choice["finish_reason"].is_string()
                           ? choice["finish_reason"].get<std::string>()
                           : std::string("stop");
  if (reason == "stop" || reason == "eos" || reason == "end_turn") {
    r.finish_reason = FinishReason::Stop;
  } else if (reason == "length" || reason == "max_tokens") {
    r.finish_reason = FinishReason::Length;
  } else if (reason == "content_filter" || reason == "content-filter") {
    r.finish_reason = FinishReason::ContentFilter;
  } else {
    throw ProtocolError("unsupported finish_reason '" + reason + "'");
  }
  if (r.text.empty() && r.finish_reason != FinishReason::ContentFilter) {
    throw ProtocolError("empty completion with finish_reason '" + reason + "'");
  }
  return r;
}

}  // namespace

ChatClient::ChatClient(ClientOptions options) : options_(std::move(options)) {
  if (!options_.sleep) {
    options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
  if (!options_.env) {
    options_.env = [](const std::string& name) -> std::optional<std::string> {
      if (const char* v = std::getenv(name.c_str())) return std::string(v);
      return std::nullopt;
    };
  }
  if (options_.retry.max_attempts < 1) options_.retry.max_attempts = 1;
}

ModelResponse ChatClient::send_single_turn(const ModelTarget& target, std::string_view prompt_text) const {
  if (prompt_text.empty()) throw Error("InvalidPrompt", "prompt text is empty");
  const Endpoint ep = parse_endpoint(target.endpoint_url);

  httplib::Headers headers;
  if (!target.auth_ref.empty()) {
    auto key = options_.env(target.auth_ref);
    if (!key || key->empty()) throw AuthError("credential variable " + target.auth_ref + " is not set");
    headers.emplace("Authorization", "Bearer " + *key);
  }
  const std::string body = build_request_body(target, prompt_text);
  const std::string base = ep.scheme + "://" + ep.host + ":" + std::to_string(ep.port);

  int last_status = 0;
  std::string last_problem;
  for (int attempt = 1; attempt <= options_.retry.max_attempts; ++attempt) {
    if (attempt > 1) options_.sleep(options_.retry.delay_before(attempt));

    httplib::Client cli(base);
    cli.set_connection_timeout(options_.connect_timeout);
    cli.set_read_timeout(options_.read_timeout);
    cli.set_write_timeout(options_.read_timeout);
    const auto started = std::chrono::steady_clock::now();
    auto res = cli.Post(ep.path, headers, body, "application/json");
    const double latency =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();

    if (!res) {
      last_status = 0;
      last_problem = httplib::to_string(res.error());
      continue;
    }
    last_status = res->status;
    if (res->status == 200) {
      auto r = parse_completion(res->body, res->status);
      r.latency_ms = latency;
      r.attempt_count = attempt;
      return r;
    }
    if (res->status == 401 || res->status == 403) {
      throw AuthError("endpoint rejected credentials with status " + std::to_string(res->status));
    }
    if (res->status >= 400 && res->status < 500 && mentions_content_filter(res->body)) {
      ModelResponse r;
      r.finish_reason = FinishReason::ContentFilter;
      r.latency_ms = latency;
      r.attempt_count = attempt;
      r.raw_status = res->status;
      return r;
    }
    if (!retryable_status(res->status)) {
      throw TransportError("non-retryable status " + std::to_string(res->status), attempt, res->status);
    }
    last_problem = "status " + std::to_string(res->status);
  }
  throw TransportError("gave up after " + std::to_string(options_.retry.max_attempts) +
                           " attempts: " + last_problem,
                       options_.retry.max_attempts, last_status);
}

}  // namespace schemaprobe
