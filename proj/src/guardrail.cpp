#include "schemaprobe/guardrail.hpp"

#include <algorithm>
#include <cctype>

#include "schemaprobe/digest.hpp"
#include "schemaprobe/error.hpp"

namespace schemaprobe {

namespace {

using ojson = nlohmann::ordered_json;

constexpr std::string_view kPromptToken = "{prompt}";
constexpr std::string_view kOpenThink = "<thinking>";
constexpr std::string_view kCloseThink = "</thinking>";
constexpr std::string_view kSyntheticFragment = "[guard reply could not be parsed]";

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::size_t count_of(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string_view::npos; p = hay.find(needle, p + needle.size())) ++n;
  return n;
}

GuardrailDecision fail_closed(std::string reason, std::string trace) {
  GuardrailDecision d;
  d.fragments.push_back({std::string(kSyntheticFragment), FragmentKind::Sentence, {}, false});
  d.flags.push_back(GuardFlag::Harmful);
  d.overall = GuardFlag::Harmful;
  d.fail_closed = true;
  d.reason = std::move(reason);
  d.trace = std::move(trace);
  return d;
}

std::optional<GuardFlag> parse_flag(std::string_view s) {
  auto l = lower(s);
  if (l == "harmful") return GuardFlag::Harmful;
  if (l == "benign") return GuardFlag::Benign;
  return std::nullopt;
}

// The outermost balanced {...} starting at the first '{', strings skipped.
std::optional<std::string_view> first_object(std::string_view s) {
  auto start = s.find('{');
  if (start == std::string_view::npos) return std::nullopt;
  int depth = 0;
  bool in_str = false;
  for (std::size_t i = start; i < s.size(); ++i) {
    char c = s[i];
    if (in_str) {
      if (c == '\\') ++i;
      else if (c == '"') in_str = false;
    } else if (c == '"') {
      in_str = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}' && --depth == 0) {
      return s.substr(start, i - start + 1);
    }
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(GuardFlag f) { return f == GuardFlag::Harmful ? "Harmful" : "Benign"; }
std::string_view to_string(GuardMode m) { return m == GuardMode::Llm ? "llm" : "transcriber-only"; }

GuardFlag fold_or(const std::vector<GuardFlag>& flags) {
  return std::any_of(flags.begin(), flags.end(), [](GuardFlag f) { return f == GuardFlag::Harmful; })
             ? GuardFlag::Harmful
             : GuardFlag::Benign;
}

std::size_t GuardrailDecision::flagged_count() const {
  return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), GuardFlag::Harmful));
}

ojson GuardrailDecision::to_json() const {
  ojson frags = ojson::array();
  for (std::size_t i = 0; i < fragments.size(); ++i) {
    const auto& f = fragments[i];
    ojson item;
    item["text"] = f.text;
    item["kind"] = std::string(to_string(f.kind));
    item["span"] = {f.span.begin, f.span.end};
    item["flag"] = lower(to_string(i < flags.size() ? flags[i] : GuardFlag::Benign));
    if (f.unterminated) item["unterminated"] = true;
    frags.push_back(std::move(item));
  }
  ojson j;
  j["mode"] = std::string(to_string(mode));
  j["overall"] = std::string(to_string(overall));
  j["flagged"] = flagged_count();
  j["fragments"] = std::move(frags);
  if (fail_closed) {
    j["fail_closed"] = true;
    j["reason"] = reason;
  }
  if (!trace.empty()) j["trace"] = trace;
  return j;
}

std::vector<std::string> guard_policy_problems(std::string_view text) {
  std::vector<std::string> p;
  if (count_of(text, kPromptToken) != 1) p.push_back("protocol must contain {prompt} exactly once");
  for (const char* step : {"1.", "2.", "3."}) {
    if (text.find(step) == std::string_view::npos) p.push_back(std::string("missing numbered step ") + step);
  }
  const auto low = lower(text);
  if (low.find("transcri") == std::string::npos) p.push_back("missing step: literal transcription");
  if (low.find("harmful") == std::string::npos) p.push_back("missing step: flag Harmful if any fragment is harmful");
  return p;
}

GuardPolicy make_guard_policy(std::string protocol_text) {
  if (auto p = guard_policy_problems(protocol_text); !p.empty()) throw Error("InvalidPolicy", p.front());
  GuardPolicy policy;
  policy.digest = sha256_hex(protocol_text);
  policy.protocol_text = std::move(protocol_text);
  return policy;
}

GuardPolicy load_guard_policy(const std::filesystem::path& path) { return make_guard_policy(read_file(path)); }

std::string build_guard_request(std::string_view prompt, const GuardPolicy& policy) {
  const auto& p = policy.protocol_text;
  const auto at = p.find(kPromptToken);
  if (at == std::string::npos) throw Error("InvalidPolicy", "protocol has no {prompt} placeholder");
  std::string out;
  out.reserve(p.size() + prompt.size());
  out.append(p, 0, at);
  out.append(prompt);
  out.append(p, at + kPromptToken.size());
  return out;
}

GuardrailDecision parse_guard_output(std::string_view reply) {
  std::string trace;
  std::string rest(reply);
  if (auto open = reply.find(kOpenThink); open != std::string_view::npos) {
    auto close = reply.find(kCloseThink, open + kOpenThink.size());
    if (close == std::string_view::npos) {
      return fail_closed("unterminated thinking block", std::string(reply.substr(open + kOpenThink.size())));
    }
    trace = std::string(reply.substr(open + kOpenThink.size(), close - open - kOpenThink.size()));
    rest = std::string(reply.substr(0, open)) + std::string(reply.substr(close + kCloseThink.size()));
  }
  auto object = first_object(rest);
  if (!object) return fail_closed("no JSON object in reply", trace);
  ojson doc = ojson::parse(*object, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return fail_closed("reply JSON does not parse", trace);
  if (!doc.contains("fragments") || !doc["fragments"].is_array()) {
    return fail_closed("reply has no fragments array", trace);
  }
  GuardrailDecision d;
  d.mode = GuardMode::Llm;
  for (const auto& item : doc["fragments"]) {
    if (!item.is_object() || !item.contains("text") || !item["text"].is_string() || !item.contains("flag") ||
        !item["flag"].is_string()) {
      return fail_closed("fragment entry lacks text or flag", trace);
    }
    auto flag = parse_flag(item["flag"].get<std::string>());
    if (!flag) return fail_closed("unknown flag '" + item["flag"].get<std::string>() + "'", trace);
    d.fragments.push_back({item["text"].get<std::string>(), FragmentKind::Sentence, {}, false});
    d.flags.push_back(*flag);
  }
  d.overall = fold_or(d.flags);
  d.trace = std::move(trace);
  if (doc.contains("overall")) {
    std::optional<GuardFlag> claimed;
    if (doc["overall"].is_string()) claimed = parse_flag(doc["overall"].get<std::string>());
    if (!claimed || *claimed != d.overall) {
      if (!d.trace.empty()) d.trace += "\n";
      d.trace += "note: guard claimed overall " + doc["overall"].dump() + ", recomputed " +
                 std::string(to_string(d.overall)) + " from fragment flags";
    }
  }
  return d;
}

bool FlagLexicon::matches(std::string_view text) const {
  const auto low = lower(text);
  return std::any_of(terms.begin(), terms.end(), [&](const std::string& t) { return low.find(t) != std::string::npos; });
}

FlagLexicon parse_flag_lexicon(std::string_view text) {
  FlagLexicon lex;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.remove_suffix(1);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.front()))) line.remove_prefix(1);
    if (!line.empty() && line.front() != '#') lex.terms.push_back(lower(line));
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return lex;
}

FlagLexicon load_flag_lexicon(const std::filesystem::path& path) { return parse_flag_lexicon(read_file(path)); }

GuardrailDecision guard_transcriber_only(std::string_view prompt, const FlagLexicon& lexicon) {
  GuardrailDecision d;
  d.mode = GuardMode::TranscriberOnly;
  d.fragments = transcribe_literals(prompt);
  d.flags.reserve(d.fragments.size());
  for (const auto& f : d.fragments) d.flags.push_back(lexicon.matches(f.text) ? GuardFlag::Harmful : GuardFlag::Benign);
  d.overall = fold_or(d.flags);
  return d;
}

std::vector<std::string> chunk_fragments(const std::vector<Fragment>& fragments, std::size_t limit) {
  limit = std::max<std::size_t>(limit, 1);
  std::vector<std::string> chunks;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) chunks.push_back(std::move(current));
    current.clear();
  };
  for (const auto& f : fragments) {
    std::string_view text = f.text;
    while (text.size() > limit) {
      flush();
      chunks.emplace_back(text.substr(0, limit));
      text.remove_prefix(limit);
    }
    if (text.empty()) continue;
    if (!current.empty() && current.size() + 1 + text.size() > limit) flush();
    if (!current.empty()) current += '\n';
    current += text;
  }
  flush();
  return chunks;
}

GuardrailDecision guard_with_model(std::string_view prompt, const GuardPolicy& policy, const ModelTarget& guard,
                                   const ChatClient& client, std::size_t max_prompt_chars) {
  if (prompt.size() <= max_prompt_chars) {
    auto reply = client.send_single_turn(guard, build_guard_request(prompt, policy));
    return parse_guard_output(reply.text);
  }
  GuardrailDecision merged;
  merged.mode = GuardMode::Llm;
  const auto chunks = chunk_fragments(transcribe_literals(prompt), max_prompt_chars);
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    auto reply = client.send_single_turn(guard, build_guard_request(chunks[i], policy));
    auto part = parse_guard_output(reply.text);
    merged.fragments.insert(merged.fragments.end(), part.fragments.begin(), part.fragments.end());
    merged.flags.insert(merged.flags.end(), part.flags.begin(), part.flags.end());
    if (!part.trace.empty()) merged.trace += "[chunk " + std::to_string(i + 1) + "]\n" + part.trace + "\n";
    if (part.fail_closed) {
      merged.fail_closed = true;
      if (!merged.reason.empty()) merged.reason += "; ";
      merged.reason += "chunk " + std::to_string(i + 1) + ": " + part.reason;
    }
  }
  merged.overall = fold_or(merged.flags);
  return merged;
}

GuardMetrics guard_metrics_from_counts(std::size_t positives, std::size_t flagged_positives, std::size_t negatives,
                                       std::size_t flagged_negatives, std::size_t fail_closed) {
  if (positives == 0 && negatives == 0) throw EmptySet("no labeled guard decisions");
  GuardMetrics m;
  m.positives = positives;
  m.negatives = negatives;
  m.flagged_positives = flagged_positives;
  m.flagged_negatives = flagged_negatives;
  m.fail_closed = fail_closed;
  if (positives) m.tpr = static_cast<double>(flagged_positives) / static_cast<double>(positives);
  if (negatives) {
    m.fpr = static_cast<double>(flagged_negatives) / static_cast<double>(negatives);
    m.accuracy_on_negatives = static_cast<double>(negatives - flagged_negatives) / static_cast<double>(negatives);
  }
  return m;
}

GuardMetrics evaluate_guardrail(const std::vector<GuardrailDecision>& positives,
                                const std::vector<GuardrailDecision>& negatives) {
  auto flagged = [](const std::vector<GuardrailDecision>& ds) {
    return static_cast<std::size_t>(
        std::count_if(ds.begin(), ds.end(), [](const auto& d) { return d.overall == GuardFlag::Harmful; }));
  };
  auto failed = [](const std::vector<GuardrailDecision>& ds) {
    return static_cast<std::size_t>(std::count_if(ds.begin(), ds.end(), [](const auto& d) { return d.fail_closed; }));
  };
  return guard_metrics_from_counts(positives.size(), flagged(positives), negatives.size(), flagged(negatives),
                                   failed(positives) + failed(negatives));
}

}  // namespace schemaprobe
