#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "igrl/vocab.hpp"

namespace igrl {

enum class TaskKind { MultiLabel, NumericDistance, MultipleChoice, NumericExact };

const char* kind_name(TaskKind kind);
std::optional<TaskKind> parse_kind(const std::string& name);

// Gold target, one alternative per task kind: a sorted label set, a positive
// integer, or an option letter.
struct GoldTarget {
  std::variant<std::vector<std::string>, long long, char> value;

  const std::vector<std::string>& labels() const { return std::get<std::vector<std::string>>(value); }
  long long number() const { return std::get<long long>(value); }
  char choice() const { return std::get<char>(value); }

  bool operator==(const GoldTarget&) const = default;
};

struct TaskInstance {
  std::string id;
  TaskKind kind = TaskKind::MultiLabel;
  std::vector<int> prompt;  // token ids, no tag tokens
  GoldTarget gold;
};

// The two conditioning contexts for one task. The direct context asks for the
// answer alone and primes the answer tag; the reasoning prefix asks for a
// tagged derivation, so the sampled output carries the full tag structure
// itself.
struct PromptPair {
  std::vector<int> direct_context;
  std::vector<int> reasoning_context_prefix;
};

struct SftTrace {
  std::string task_id;
  std::vector<int> context;  // reasoning-mode context
  std::vector<int> target;   // <reasoning> ... </reasoning> <answer> gold </answer> <eos>
};

std::vector<TaskInstance> generate_task_suite(const Vocab& vocab, uint64_t seed,
                                              const std::map<TaskKind, int>& counts_per_kind);

PromptPair render_prompts(const Vocab& vocab, const TaskInstance& task);

// Re-derives the gold target from the prompt alone. Every generated instance
// satisfies oracle_solve(task) == task.gold.
GoldTarget oracle_solve(const Vocab& vocab, const TaskInstance& task);

// Oracle-written reasoning traces. Throws if a task is not solvable, which
// indicates a corpus bug. Reasoning phrasing varies with the seed; the answer
// span is always the canonical gold rendering.
std::vector<SftTrace> generate_sft_traces(const Vocab& vocab,
                                          const std::vector<TaskInstance>& suite, uint64_t seed);

// Canonical answer rendering: labels sorted and comma-separated, numbers as
// bare base-10 digit tokens, choices as a single letter.
std::string canonical_answer(const GoldTarget& gold);
std::vector<int> canonical_answer_tokens(const Vocab& vocab, const GoldTarget& gold);

// Parses a canonical answer string back into a gold target for the given kind.
GoldTarget parse_canonical_answer(TaskKind kind, const std::string& text);

// Default marked-token lexicon for prominence probes: the label inventory.
std::vector<int> label_inventory_ids(const Vocab& vocab);

}  // namespace igrl
