#pragma once

#include <atomic>
#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace schemaprobe {

// One scripted behaviour of the mock chat-completions endpoint. A request
// matches when its model equals `model` (if set), its user message contains
// every `match_all` substring and none of the `match_none` substrings.
// The first `prelude.size()` matching requests receive those HTTP statuses;
// afterwards the n-th matching request receives replies[n] (the last reply
// repeats). "{model}" in a reply expands to the requested model id.
struct ScriptedReply {
  std::string label;
  std::optional<std::string> model;
  std::vector<std::string> match_all;
  std::vector<std::string> match_none;
  std::vector<std::string> replies;
  std::string finish_reason = "stop";  // stop | length | content_filter
  std::vector<int> prelude;
};

struct MockScript {
  std::vector<ScriptedReply> entries;
  std::optional<ScriptedReply> fallback;  // used when nothing else matches
};

// Script documents (JSON): {"entries": [...], "fallback": {...}}. Entry
// keys: label, model, match (one substring), match_all, match_none, reply,
// replies, finish_reason, prelude. Throws Error("ScriptError").
MockScript parse_mock_script(std::string_view text);
MockScript load_mock_script(const std::string& path);

/// Loopback-only scripted chat-completions server for tests and offline
/// demos. Requests that are not a single user message get HTTP 400; a
/// request matched by two entries gets 500; no match and no fallback, 404.
class MockChatServer {
 public:
  explicit MockChatServer(MockScript script);
  ~MockChatServer();

  MockChatServer(const MockChatServer&) = delete;
  MockChatServer& operator=(const MockChatServer&) = delete;

  // Binds 127.0.0.1:`port` (0 picks a free port) and serves on a background
  // thread. Returns the bound port. Throws PortInUse.
  int start(int port = 0);
  void stop();

  int port() const { return port_; }
  std::string url() const;  // http://127.0.0.1:<port>/v1/chat/completions

  std::size_t request_count() const { return requests_.load(); }
  std::size_t completion_count() const { return completions_.load(); }
  std::vector<std::string> request_bodies() const;
  // Requests answered by the entry labelled `label` (statuses included).
  std::size_t hits(std::string_view label) const;

 private:
  struct State;
  std::unique_ptr<State> state_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<std::size_t> requests_{0};
  std::atomic<std::size_t> completions_{0};
};

}  // namespace schemaprobe
