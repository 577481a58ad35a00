#include "igrl/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace igrl {

namespace {

int find_token(std::span<const int> toks, int id, size_t from) {
  for (size_t i = from; i < toks.size(); ++i) {
    if (toks[i] == id) {
      return static_cast<int>(i);
    }
  }
  return -1;
}

bool clean_body(const Vocab& v, std::span<const int> toks, size_t begin, size_t end) {
  for (size_t i = begin; i < end; ++i) {
    if (v.is_tag(toks[i])) {
      return false;
    }
  }
  return true;
}

// First maximal run of digit tokens, parsed as an integer. Returns -1 when
// the span has no digits.
long long first_digit_run(const Vocab& v, std::span<const int> toks) {
  long long value = 0;
  bool in_run = false;
  for (int id : toks) {
    if (v.is_digit(id)) {
      value = value * 10 + (v.token(id)[0] - '0');
      in_run = true;
    } else if (in_run) {
      return value;
    }
  }
  return in_run ? value : -1;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double mean_realized_logit(const std::vector<TeacherForcedEntry>& entries) {
  double acc = 0.0;
  for (const auto& e : entries) {
    acc += e.logit;
  }
  return acc / static_cast<double>(entries.size());
}

}  // namespace

void DistanceRewardConfig::validate() const {
  if (!(c > 0.0)) {
    throw std::invalid_argument("distance reward constant c must be positive");
  }
}

void InfoGainConfig::validate() const {
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("info-gain temperature must be positive");
  }
}

const char* reward_mode_name(RewardMode mode) {
  return mode == RewardMode::InfoGain ? "info_gain" : "legal_only";
}

std::optional<RewardMode> parse_reward_mode(const std::string& name) {
  if (name == "info_gain") return RewardMode::InfoGain;
  if (name == "legal_only") return RewardMode::LegalOnly;
  return std::nullopt;
}

StructuredOutput parse_structured_output(const Vocab& v, std::span<const int> raw_tokens) {
  StructuredOutput s;
  s.raw_tokens.assign(raw_tokens.begin(), raw_tokens.end());

  const int r_open = find_token(raw_tokens, v.reasoning_open, 0);
  const int r_close =
      r_open >= 0 ? find_token(raw_tokens, v.reasoning_close, static_cast<size_t>(r_open) + 1)
                  : find_token(raw_tokens, v.reasoning_close, 0);
  const int a_open = find_token(raw_tokens, v.answer_open, 0);
  const int a_close =
      a_open >= 0 ? find_token(raw_tokens, v.answer_close, static_cast<size_t>(a_open) + 1)
                  : find_token(raw_tokens, v.answer_close, 0);

  s.flags.reasoning_open = r_open >= 0;
  s.flags.reasoning_close = r_close >= 0;
  s.flags.answer_open = a_open >= 0;
  s.flags.answer_close = a_close >= 0;

  if (r_open >= 0 && r_close > r_open &&
      clean_body(v, raw_tokens, static_cast<size_t>(r_open) + 1, static_cast<size_t>(r_close))) {
    s.flags.reasoning_paired = true;
    s.reasoning_span.emplace(raw_tokens.begin() + r_open + 1, raw_tokens.begin() + r_close);
  }
  if (a_open >= 0 && a_close > a_open &&
      clean_body(v, raw_tokens, static_cast<size_t>(a_open) + 1, static_cast<size_t>(a_close))) {
    s.flags.answer_paired = true;
    s.answer_span.emplace(raw_tokens.begin() + a_open + 1, raw_tokens.begin() + a_close);
  }
  s.flags.ordered = s.flags.reasoning_paired && s.flags.answer_paired && a_open > r_close;
  return s;
}

double format_reward(const StructuredOutput& s) {
  double r = 0.0;
  if (s.flags.reasoning_paired) {
    r += 0.5;
  }
  // The answer block earns credit on its own, but not when it precedes a
  // reasoning block.
  if (s.flags.answer_paired && (!s.flags.reasoning_paired || s.flags.ordered)) {
    r += 0.5;
  }
  return r;
}

std::vector<std::string> parse_label_set(const Vocab& v, std::span<const int> span) {
  std::set<std::string> pred;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      pred.insert(cur);
      cur.clear();
    }
  };
  const int comma = v.id(",");
  for (int id : span) {
    if (id == comma) {
      flush();
    } else {
      if (!cur.empty()) {
        cur.push_back(' ');
      }
      cur += v.token(id);
    }
  }
  flush();
  return {pred.begin(), pred.end()};
}

long long parse_first_number(const Vocab& v, std::span<const int> span) {
  return first_digit_run(v, span);
}

double legal_reward(const Vocab& v, const StructuredOutput& s, const TaskInstance& task,
                    const DistanceRewardConfig& cfg) {
  cfg.validate();
  if (!s.answer_span.has_value() || s.answer_span->empty()) {
    return 0.0;
  }
  const std::vector<int>& span = *s.answer_span;

  switch (task.kind) {
    case TaskKind::MultiLabel: {
      // Unknown predicted labels stay in the set as false positives.
      const std::vector<std::string> pred = parse_label_set(v, span);
      if (pred.empty()) {
        return 0.0;
      }
      const std::set<std::string> gold(task.gold.labels().begin(), task.gold.labels().end());
      size_t hits = 0;
      for (const auto& label : pred) {
        hits += gold.count(label);
      }
      if (hits == 0) {
        return 0.0;
      }
      const double precision = static_cast<double>(hits) / static_cast<double>(pred.size());
      const double recall = static_cast<double>(hits) / static_cast<double>(gold.size());
      return 2.0 * precision * recall / (precision + recall);
    }
    case TaskKind::NumericDistance: {
      const long long pred = first_digit_run(v, span);
      if (pred <= 0) {
        return 0.0;
      }
      const double dist = std::fabs(std::log(static_cast<double>(pred)) -
                                    std::log(static_cast<double>(task.gold.number())));
      return std::exp(-dist / cfg.c);
    }
    case TaskKind::MultipleChoice:
    case TaskKind::NumericExact: {
      const std::vector<int> gold_tokens = canonical_answer_tokens(v, task.gold);
      return span == gold_tokens ? 1.0 : 0.0;
    }
  }
  return 0.0;
}

std::vector<int> assemble_reasoning_context(const Vocab& v, const PromptPair& pair,
                                            std::span<const int> reasoning_span) {
  std::vector<int> ctx = pair.reasoning_context_prefix;
  ctx.push_back(v.reasoning_open);
  ctx.insert(ctx.end(), reasoning_span.begin(), reasoning_span.end());
  ctx.push_back(v.reasoning_close);
  ctx.push_back(v.answer_open);
  return ctx;
}

DeltaQResult delta_q(const PolicyParams& snapshot, const Vocab& v, const PromptPair& pair,
                     std::span<const int> reasoning_span, std::span<const int> answer_span) {
  DeltaQResult r;
  if (answer_span.empty()) {
    return r;  // defined == false, delta_q == 0
  }
  const size_t max_seq = static_cast<size_t>(snapshot.cfg.max_seq);
  const size_t reasoning_len =
      pair.reasoning_context_prefix.size() + reasoning_span.size() + 3 + answer_span.size();
  const size_t direct_len = pair.direct_context.size() + answer_span.size();
  if (reasoning_len > max_seq || direct_len > max_seq) {
    return r;  // conditioning does not fit: flagged, not failed
  }
  const std::vector<int> ctx_r = assemble_reasoning_context(v, pair, reasoning_span);
  const auto reason = teacher_forced_logits(snapshot, ctx_r, answer_span);
  const auto direct = teacher_forced_logits(snapshot, pair.direct_context, answer_span);
  r.logit_reasoning = mean_realized_logit(reason);
  r.logit_direct = mean_realized_logit(direct);
  r.delta_q = r.logit_reasoning - r.logit_direct;
  r.defined = true;
  return r;
}

Decomposition decomposition_check(const PolicyParams& snapshot, const Vocab& v,
                                  const PromptPair& pair, std::span<const int> reasoning_span,
                                  std::span<const int> answer_span) {
  Decomposition d;
  if (answer_span.empty()) {
    return d;
  }
  const std::vector<int> ctx_r = assemble_reasoning_context(v, pair, reasoning_span);
  const auto reason = teacher_forced_logits(snapshot, ctx_r, answer_span);
  const auto direct = teacher_forced_logits(snapshot, pair.direct_context, answer_span);

  const double n = static_cast<double>(answer_span.size());
  double dq = 0.0;
  for (size_t k = 0; k < answer_span.size(); ++k) {
    d.pmi_term += reason[k].logprob - direct[k].logprob;
    d.logz_term += reason[k].logZ - direct[k].logZ;
    dq += reason[k].logit - direct[k].logit;
  }
  d.pmi_term /= n;
  d.logz_term /= n;
  d.residual = dq / n - (d.pmi_term + d.logz_term);
  return d;
}

InfoReward info_reward(double r_legal, double dq, const InfoGainConfig& cfg) {
  cfg.validate();
  InfoReward r;
  r.modulation = sigmoid(dq * cfg.temperature);
  r.r_info = r_legal * r.modulation;
  return r;
}

RewardBreakdown score_trajectory(const PolicyParams& snapshot, const Vocab& v,
                                 const TaskInstance& task, const PromptPair& pair,
                                 std::span<const int> sampled_tokens, const InfoGainConfig& info,
                                 const DistanceRewardConfig& dist, DeltaQResult* probe) {
  const StructuredOutput parsed = parse_structured_output(v, sampled_tokens);
  RewardBreakdown b;
  b.r_format = format_reward(parsed);
  b.r_legal = legal_reward(v, parsed, task, dist);

  const std::span<const int> reasoning =
      parsed.reasoning_span.has_value() ? std::span<const int>(*parsed.reasoning_span)
                                        : std::span<const int>();
  const std::span<const int> answer = parsed.answer_span.has_value()
                                          ? std::span<const int>(*parsed.answer_span)
                                          : std::span<const int>();
  const DeltaQResult dq = delta_q(snapshot, v, pair, reasoning, answer);
  if (probe != nullptr) {
    *probe = dq;
  }
  b.delta_q = dq.delta_q;
  b.dq_defined = dq.defined;

  const InfoReward ir = info_reward(b.r_legal, b.delta_q, info);
  b.modulation = ir.modulation;
  b.r_info = ir.r_info;
  b.total = info.mode == RewardMode::InfoGain ? b.r_format + b.r_info : b.r_format + b.r_legal;
  return b;
}

}  // namespace igrl
