#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "igrl/corpus.hpp"
#include "igrl/policy.hpp"
#include "igrl/rewards.hpp"

namespace igrl {

struct KindMetrics {
  double f1 = 0.0;        // macro-averaged, multi-label only
  double jaccard = 0.0;   // macro-averaged, multi-label only
  double accuracy = 0.0;  // non-multi-label kinds
  int count = 0;
  bool has_f1 = false;
  bool has_accuracy = false;
};

struct EvalReport {
  std::map<TaskKind, KindMetrics> per_kind;
  std::string mode;
  std::string checkpoint_id;
};

// One decoded instance, kept for sequence-level analyses.
struct EvalOutput {
  std::string task_id;
  TaskKind kind = TaskKind::MultiLabel;
  std::vector<int> generated;
  std::optional<std::vector<int>> reasoning_span;
  std::optional<std::vector<int>> answer_span;
  size_t length = 0;   // generated token count
  double score = 0.0;  // instance F1 for multi-label, 0/1 otherwise
};

// Per-instance scoring of a parsed answer span against the task gold.
// Multi-label spans yield set F1 and Jaccard; the other kinds yield a correct
// flag (canonical match, or within numeric_band relative error for the
// distance kind). An absent or empty span scores zero.
struct InstanceMetrics {
  double f1 = 0.0;
  double jaccard = 0.0;
  bool correct = false;
};

InstanceMetrics score_answer_span(const Vocab& vocab, const TaskInstance& task,
                                  std::span<const int> answer_span, double numeric_band);

// Greedy decoding from the reasoning-mode context of every task. Multi-label
// instances report per-instance F1 and Jaccard, macro-averaged; choice and
// exact-numeric report canonical-match accuracy; numeric-distance counts a
// prediction within numeric_band relative error of gold as correct.
EvalReport evaluate(const PolicyParams& params, const Vocab& vocab,
                    const std::vector<TaskInstance>& suite, int max_new_tokens,
                    double numeric_band = 0.05, std::vector<EvalOutput>* outputs = nullptr);

// Mean realized-token raw logit over positions whose realized token is in the
// marked set, minus the mean over all realized positions. The first sequence
// token only conditions; realized positions start at index 1. Throws when no
// realized position is marked.
double token_prominence(const PolicyParams& params, std::span<const int> sequence,
                        const std::set<int>& marked_token_ids);

// exp(mean negative log-prob) of answer tokens teacher-forced after context.
double answer_perplexity(const PolicyParams& scorer, std::span<const int> context,
                         std::span<const int> answer);

// Perplexity of the canonical gold answer conditioned on the reasoning-mode
// context plus the given reasoning span, under a frozen scorer checkpoint.
double reasoning_quality_ppl(const PolicyParams& scorer, const Vocab& vocab,
                             const TaskInstance& task, std::span<const int> reasoning_span);

struct StepPoint {
  double mean_dq = 0.0;
  double mean_reward = 0.0;  // mean legal reward at that step
};

struct CorrelationReport {
  struct Stage {
    double mean_dq = 0.0;
    double mean_reward = 0.0;
    int steps = 0;
  };
  Stage stages[3];
  double pearson_r = 0.0;
  bool degenerate = false;  // zero variance in either series
};

// Splits the run into three equal-length stages and reports stage means plus
// the Pearson correlation between per-step delta-Q and legal-reward means.
CorrelationReport correlation_report(std::span<const StepPoint> points);

struct LengthScoreTable {
  struct Row {
    std::string run;     // "baseline" or "candidate"
    std::string bucket;  // "short", "long", or "all" when degenerate
    double mean_length = 0.0;
    double mean_score = 0.0;
    int count = 0;
  };
  std::vector<Row> rows;
  double median_length = 0.0;  // of the baseline run
  bool degenerate_split = false;
};

// Median-split on the baseline run's lengths defines the short/long buckets;
// both runs are reported per bucket. Outputs are matched by task id.
LengthScoreTable length_score_table(std::span<const EvalOutput> baseline,
                                    std::span<const EvalOutput> candidate);

}  // namespace igrl
