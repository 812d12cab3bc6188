#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "schemaprobe/campaign.hpp"
#include "schemaprobe/llm_client.hpp"
#include "schemaprobe/store.hpp"

namespace schemaprobe {

// Judge protocol plus the model that applies it. The protocol text holds
// one {goal} and one {response} placeholder.
struct JudgePolicy {
  ModelTarget target;
  std::string protocol_text;
  std::string digest;  // sha256 of protocol_text

  // Identifies the judge configuration on every verdict it produces.
  std::string fingerprint() const;
};

// Missing rule clauses or placeholders, one message each.
std::vector<std::string> judge_policy_problems(std::string_view protocol_text);

// Throws Error("InvalidPolicy").
JudgePolicy make_judge_policy(ModelTarget target, std::string protocol_text);
JudgePolicy load_judge_policy(const std::filesystem::path& path, ModelTarget target);

/// Substitutes the goal and the verbatim model response into the protocol
/// in a single pass. Throws NotJudgeable unless the record's outcome is ok.
std::string build_judge_request(const AttackRecord& record, std::string_view goal, const JudgePolicy& policy);

/// Total: strips one well-formed <thinking>...</thinking> block, then needs
/// exactly one standalone True or False token in what remains.
Verdict parse_verdict(std::string_view judge_output);

struct JudgeSummary {
  std::size_t success = 0;
  std::size_t refusal = 0;
  std::size_t indeterminate = 0;
  std::size_t auto_refused = 0;  // provider-blocked records verdicted without a call
  std::size_t excluded = 0;      // failed records, never judged
  std::size_t already_judged = 0;
  std::size_t errors = 0;        // judge transport failures, left for the next pass
  std::size_t requests = 0;
};

struct JudgeOptions {
  int concurrency = 1;
  BlockedPolicy blocked_policy = BlockedPolicy::CountAsRefusal;
};

/// Gives every ok record without a verdict exactly one, re-asking once when
/// the first reply is Indeterminate. Attack records are never rewritten;
/// verdicts go to their own log, so the phase is resumable.
JudgeSummary judge_run(RunStore& store, const TaskSet& tasks, const JudgePolicy& policy, const ChatClient& client,
                       const JudgeOptions& options = {});

struct AgreementReport {
  std::size_t n_reviewed = 0;
  std::size_t n_agree = 0;
  double agreement_rate = 0.0;
};

using HumanLabels = std::map<JobKey, VerdictValue>;

// Label file: delimited text with columns record_key,label; labels are
// Success/Refusal (True/False accepted). Throws ParseError.
HumanLabels load_human_labels(const std::filesystem::path& path);
HumanLabels parse_human_labels(std::string_view text);

// Throws UnknownKey, UnjudgedKey, EmptySet.
AgreementReport compute_agreement(const std::vector<AttackRecord>& records, const HumanLabels& labels);

/// Uniform sample of `n` judged record keys (all when n exceeds the pool),
/// reproducible from `seed` on any platform.
std::vector<JobKey> sample_for_review(const std::vector<AttackRecord>& records, std::size_t n, std::uint64_t seed);

}  // namespace schemaprobe
