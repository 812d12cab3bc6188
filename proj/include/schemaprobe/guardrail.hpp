#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "schemaprobe/llm_client.hpp"
#include "schemaprobe/transcriber.hpp"

namespace schemaprobe {

enum class GuardFlag { Benign, Harmful };
enum class GuardMode { Llm, TranscriberOnly };

std::string_view to_string(GuardFlag f);
std::string_view to_string(GuardMode m);

struct GuardrailDecision {
  std::vector<Fragment> fragments;
  std::vector<GuardFlag> flags;  // one per fragment
  GuardFlag overall = GuardFlag::Benign;
  std::string trace;             // guard reasoning plus any parser notes
  GuardMode mode = GuardMode::Llm;
  bool fail_closed = false;      // reply could not be parsed
  std::string reason;            // why it failed closed

  std::size_t flagged_count() const;
  nlohmann::ordered_json to_json() const;
};

// OR over the flags.
GuardFlag fold_or(const std::vector<GuardFlag>& flags);

struct GuardPolicy {
  std::string protocol_text;  // holds {prompt} once
  std::string digest;
};

std::vector<std::string> guard_policy_problems(std::string_view protocol_text);
// Throws Error("InvalidPolicy").
GuardPolicy make_guard_policy(std::string protocol_text);
GuardPolicy load_guard_policy(const std::filesystem::path& path);

// Embeds the prompt verbatim in place of {prompt}.
std::string build_guard_request(std::string_view prompt, const GuardPolicy& policy);

/// Reads the reply shape the shipped protocol asks for: optional reasoning
/// in <thinking> tags, then a JSON object
///   {"fragments": [{"text": "...", "flag": "harmful"|"benign"}, ...],
///    "overall": "Harmful"|"Benign"}
/// The overall value is recomputed from the flags; a disagreeing claim is
/// noted in the trace. Anything unreadable yields a Harmful decision with a
/// single synthetic fragment and fail_closed set.
GuardrailDecision parse_guard_output(std::string_view reply);

// Case-insensitive operator term list, one term per line ('#' comments).
struct FlagLexicon {
  std::vector<std::string> terms;

  bool matches(std::string_view text) const;
};

FlagLexicon parse_flag_lexicon(std::string_view text);
FlagLexicon load_flag_lexicon(const std::filesystem::path& path);

// Deterministic mode: transcribe, then flag each fragment that contains a
// lexicon term. An empty lexicon flags nothing.
GuardrailDecision guard_transcriber_only(std::string_view prompt, const FlagLexicon& lexicon);

/// Asks the guard model. A prompt longer than `max_prompt_chars` is
/// transcribed locally and its fragments are sent in chunks of at most that
/// size; per-chunk decisions are concatenated and OR-ed. Transport errors
/// propagate.
GuardrailDecision guard_with_model(std::string_view prompt, const GuardPolicy& policy, const ModelTarget& guard,
                                   const ChatClient& client, std::size_t max_prompt_chars = 24000);

// Splits fragment texts into newline-joined chunks of at most `limit` bytes.
std::vector<std::string> chunk_fragments(const std::vector<Fragment>& fragments, std::size_t limit);

struct GuardMetrics {
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t flagged_positives = 0;
  std::size_t flagged_negatives = 0;
  std::size_t fail_closed = 0;
  std::optional<double> tpr;                    // absent without positives
  std::optional<double> fpr;                    // absent without negatives
  std::optional<double> accuracy_on_negatives;  // 1 - fpr
};

// Throws EmptySet when both sets are empty.
GuardMetrics evaluate_guardrail(const std::vector<GuardrailDecision>& positives,
                                const std::vector<GuardrailDecision>& negatives);
GuardMetrics guard_metrics_from_counts(std::size_t positives, std::size_t flagged_positives, std::size_t negatives,
                                       std::size_t flagged_negatives, std::size_t fail_closed = 0);

}  // namespace schemaprobe
