#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "igrl/corpus.hpp"
#include "igrl/policy.hpp"
#include "igrl/vocab.hpp"

namespace igrl {

struct FormatFlags {
  bool reasoning_open = false;
  bool reasoning_close = false;
  bool answer_open = false;
  bool answer_close = false;
  bool reasoning_paired = false;  // open before close, clean body
  bool answer_paired = false;
  bool ordered = false;  // answer block after the reasoning block
};

// Parsed (reasoning, answer) structure of a generated sequence. Spans are the
// bodies between the first well-formed tag pairs; a span is absent when its
// pair is incomplete.
struct StructuredOutput {
  std::vector<int> raw_tokens;
  std::optional<std::vector<int>> reasoning_span;
  std::optional<std::vector<int>> answer_span;
  FormatFlags flags;

  bool well_formed() const {
    return flags.reasoning_paired && flags.answer_paired && flags.ordered;
  }
};

// Total: never fails; malformed input is reported through the flags.
StructuredOutput parse_structured_output(const Vocab& vocab, std::span<const int> raw_tokens);

// 0.5 for a clean reasoning block plus 0.5 for a clean answer block that does
// not precede it; 1.0 iff fully well-formed.
double format_reward(const StructuredOutput& s);

struct DistanceRewardConfig {
  double c = 36.0;
  void validate() const;
};

// Task-kind dispatch: set F1 for multi-label, exp(-|log pred - log true|/c)
// for numeric distance, strict canonical match for choice and exact-numeric.
// Every failure mode maps to 0.
double legal_reward(const Vocab& vocab, const StructuredOutput& s, const TaskInstance& task,
                    const DistanceRewardConfig& cfg);

// Comma-split label segments of an answer span, deduplicated. Unknown labels
// are kept (they count as false positives).
std::vector<std::string> parse_label_set(const Vocab& vocab, std::span<const int> span);

// First maximal digit-token run in a span, or -1 when there is none.
long long parse_first_number(const Vocab& vocab, std::span<const int> span);

enum class RewardMode { InfoGain, LegalOnly };

const char* reward_mode_name(RewardMode mode);
std::optional<RewardMode> parse_reward_mode(const std::string& name);

struct InfoGainConfig {
  double temperature = 0.2;
  RewardMode mode = RewardMode::InfoGain;
  void validate() const;
};

// Builds the reasoning-side conditioning: prefix, the tagged reasoning span,
// and the answer-opening scaffold.
std::vector<int> assemble_reasoning_context(const Vocab& vocab, const PromptPair& pair,
                                            std::span<const int> reasoning_span);

struct DeltaQResult {
  double delta_q = 0.0;
  double logit_reasoning = 0.0;  // mean answer-token raw logit, reasoning mode
  double logit_direct = 0.0;     // mean answer-token raw logit, direct mode
  bool defined = false;          // false when the answer span was empty
};

// Mean per-token raw-logit difference of the answer span under the
// reasoning-augmented context vs the direct context, scored with the rollout
// snapshot. An empty answer span, or a conditioning that does not fit the
// model's max_seq, yields 0 flagged as undefined.
DeltaQResult delta_q(const PolicyParams& snapshot, const Vocab& vocab, const PromptPair& pair,
                     std::span<const int> reasoning_span, std::span<const int> answer_span);

struct Decomposition {
  double pmi_term = 0.0;   // mean log p(a|q,r) - log p(a|q)
  double logz_term = 0.0;  // mean logZ_{q,r} - logZ_q
  double residual = 0.0;   // delta_q - (pmi_term + logz_term)
};

Decomposition decomposition_check(const PolicyParams& snapshot, const Vocab& vocab,
                                  const PromptPair& pair, std::span<const int> reasoning_span,
                                  std::span<const int> answer_span);

struct InfoReward {
  double modulation = 0.0;  // sigmoid(delta_q * T)
  double r_info = 0.0;      // r_legal * modulation
};

InfoReward info_reward(double r_legal, double dq, const InfoGainConfig& cfg);

struct RewardBreakdown {
  double r_format = 0.0;
  double r_legal = 0.0;
  double delta_q = 0.0;
  double modulation = 0.0;
  double r_info = 0.0;
  double total = 0.0;
  bool dq_defined = false;
};

// Full scoring pipeline for one sampled trajectory: parse, format reward,
// legal reward, delta-Q under the snapshot, information-gain composition.
// The total is r_format + r_info in info-gain mode and r_format + r_legal in
// the ablation mode. probe, when given, receives the dual-mode logit means.
RewardBreakdown score_trajectory(const PolicyParams& snapshot, const Vocab& vocab,
                                 const TaskInstance& task, const PromptPair& pair,
                                 std::span<const int> sampled_tokens, const InfoGainConfig& info,
                                 const DistanceRewardConfig& dist,
                                 DeltaQResult* probe = nullptr);

}  // namespace igrl
