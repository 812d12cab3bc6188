#include "schemaprobe/mock_server.hpp"

#include <map>

#include <nlohmann/json.hpp>

#include "http.hpp"
#include "schemaprobe/digest.hpp"
#include "schemaprobe/error.hpp"

namespace schemaprobe {

using ojson = nlohmann::ordered_json;

namespace {

std::vector<std::string> string_list(const ojson& v, const char* what) {
  std::vector<std::string> out;
  if (v.is_string()) {
    out.push_back(v.get<std::string>());
    return out;
  }
  if (!v.is_array()) throw Error("ScriptError", std::string(what) + " must be a string or list");
  for (const auto& e : v) {
    if (!e.is_string()) throw Error("ScriptError", std::string(what) + " entries must be strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

ScriptedReply parse_entry(const ojson& e, std::size_t index) {
  if (!e.is_object()) throw Error("ScriptError", "script entries must be objects");
  ScriptedReply r;
  r.label = e.value("label", "entry-" + std::to_string(index));
  if (e.contains("model")) r.model = e["model"].get<std::string>();
  if (e.contains("match")) r.match_all = string_list(e["match"], "match");
  if (e.contains("match_all")) {
    auto more = string_list(e["match_all"], "match_all");
    r.match_all.insert(r.match_all.end(), more.begin(), more.end());
  }
  if (e.contains("match_none")) r.match_none = string_list(e["match_none"], "match_none");
  if (e.contains("reply")) r.replies = string_list(e["reply"], "reply");
  if (e.contains("replies")) r.replies = string_list(e["replies"], "replies");
  r.finish_reason = e.value("finish_reason", std::string("stop"));
  if (r.finish_reason != "stop" && r.finish_reason != "length" && r.finish_reason != "content_filter") {
    throw Error("ScriptError", "unsupported finish_reason '" + r.finish_reason + "'");
  }
  if (r.replies.empty() && r.finish_reason != "content_filter") {
    throw Error("ScriptError", "entry '" + r.label + "' has no reply");
  }
  if (e.contains("prelude")) {
    for (const auto& s : e["prelude"]) r.prelude.push_back(s.get<int>());
  }
  return r;
}

std::string expand(std::string reply, const std::string& model) {
  static constexpr std::string_view kToken = "{model}";
  for (auto pos = reply.find(kToken); pos != std::string::npos; pos = reply.find(kToken, pos + model.size())) {
    reply.replace(pos, kToken.size(), model);
  }
  return reply;
}

}  // namespace

MockScript parse_mock_script(std::string_view text) {
  ojson doc;
  try {
    doc = ojson::parse(text);
  } catch (const ojson::parse_error& e) {
    throw Error("ScriptError", e.what());
  }
  if (!doc.is_object()) throw Error("ScriptError", "script must be a JSON object");
  if (doc.contains("entries") && !doc["entries"].is_array()) throw Error("ScriptError", "entries must be an array");
  MockScript s;
  if (doc.contains("entries")) {
    std::size_t i = 0;
    for (const auto& e : doc["entries"]) s.entries.push_back(parse_entry(e, i++));
  }
  if (doc.contains("fallback")) s.fallback = parse_entry(doc["fallback"], s.entries.size());
  std::map<std::string, std::size_t> labels;
  for (std::size_t i = 0; i < s.entries.size(); ++i) {
    if (!labels.emplace(s.entries[i].label, i).second) {
      throw Error("ScriptError", "duplicate entry label '" + s.entries[i].label + "'");
    }
    for (std::size_t j = 0; j < i; ++j) {
      const auto& a = s.entries[i];
      const auto& b = s.entries[j];
      if (a.model == b.model && a.match_all == b.match_all && a.match_none == b.match_none) {
        throw Error("ScriptError", "entries '" + b.label + "' and '" + a.label + "' have identical match keys");
      }
    }
  }
  return s;
}

MockScript load_mock_script(const std::string& path) { return parse_mock_script(read_file(path)); }

struct MockChatServer::State {
  MockScript script;
  httplib::Server server;
  mutable std::mutex mu;
  std::vector<std::size_t> seen;  // per entry, fallback last
  std::vector<std::string> bodies;
};

MockChatServer::MockChatServer(MockScript script) : state_(std::make_unique<State>()) {
  state_->script = std::move(script);
  state_->seen.assign(state_->script.entries.size() + 1, 0);
  state_->server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });

  state_->server.Post(R"(/.*)", [this](const httplib::Request& req, httplib::Response& res) {
    ++requests_;
    auto& st = *state_;
    std::lock_guard lock(st.mu);
    st.bodies.push_back(req.body);

    auto fail = [&](int status, const std::string& msg) {
      res.status = status;
      res.set_content(ojson{{"error", {{"message", msg}}}}.dump(), "application/json");
    };

    ojson body;
    try {
      body = ojson::parse(req.body);
    } catch (const ojson::parse_error&) {
      return fail(400, "body is not JSON");
    }
    if (!body.contains("messages") || !body["messages"].is_array() || body["messages"].size() != 1 ||
        body["messages"][0].value("role", "") != "user" || !body["messages"][0]["content"].is_string()) {
      return fail(400, "expected exactly one user message");
    }
    const std::string model = body.value("model", "");
    const std::string content = body["messages"][0]["content"].get<std::string>();

    auto matches = [&](const ScriptedReply& e) {
      if (e.model && *e.model != model) return false;
      for (const auto& s : e.match_all) {
        if (content.find(s) == std::string::npos) return false;
      }
      for (const auto& s : e.match_none) {
        if (content.find(s) != std::string::npos) return false;
      }
      return true;
    };

    std::optional<std::size_t> hit;
    for (std::size_t i = 0; i < st.script.entries.size(); ++i) {
      if (!matches(st.script.entries[i])) continue;
      if (hit) return fail(500, "ambiguous script match: " + st.script.entries[*hit].label + ", " +
                                    st.script.entries[i].label);
      hit = i;
    }
    if (!hit && st.script.fallback) hit = st.script.entries.size();
    if (!hit) return fail(404, "no scripted reply");

    const ScriptedReply& entry = *hit < st.script.entries.size() ? st.script.entries[*hit] : *st.script.fallback;
    const std::size_t n = st.seen[*hit]++;
    if (n < entry.prelude.size()) return fail(entry.prelude[n], "scripted failure");

    ojson choice;
    if (entry.finish_reason == "content_filter") {
      choice = {{"index", 0}, {"message", {{"role", "assistant"}, {"content", nullptr}}}, {"finish_reason", "content_filter"}};
    } else {
      const std::size_t k = std::min(n - entry.prelude.size(), entry.replies.size() - 1);
      choice = {{"index", 0},
                {"message", {{"role", "assistant"}, {"content", expand(entry.replies[k], model)}}},
                {"finish_reason", entry.finish_reason}};
    }
    ++completions_;
    ojson reply = {{"id", "mock-" + std::to_string(requests_.load())},
                   {"object", "chat.completion"},
                   {"model", model},
                   {"choices", ojson::array({choice})}};
    res.status = 200;
    res.set_content(reply.dump(), "application/json");
  });
}

MockChatServer::~MockChatServer() { stop(); }

int MockChatServer::start(int port) {
  auto& srv = state_->server;
  if (port == 0) {
    port_ = srv.bind_to_any_port("127.0.0.1");
    if (port_ <= 0) throw PortInUse(0);
  } else {
    if (!srv.bind_to_port("127.0.0.1", port)) throw PortInUse(port);
    port_ = port;
  }
  thread_ = std::thread([&srv] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  return port_;
}

void MockChatServer::stop() {
  if (state_) state_->server.stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockChatServer::url() const {
  return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
}

std::vector<std::string> MockChatServer::request_bodies() const {
  std::lock_guard lock(state_->mu);
  return state_->bodies;
}

std::size_t MockChatServer::hits(std::string_view label) const {
  std::lock_guard lock(state_->mu);
  for (std::size_t i = 0; i < state_->script.entries.size(); ++i) {
    if (state_->script.entries[i].label == label) return state_->seen[i];
  }
  if (state_->script.fallback && state_->script.fallback->label == label) return state_->seen.back();
  return 0;
}

}  // namespace schemaprobe
