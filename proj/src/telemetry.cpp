#include "igrl/telemetry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace igrl {

InstanceMetrics score_answer_span(const Vocab& v, const TaskInstance& task,
                                  std::span<const int> span, double numeric_band) {
  InstanceMetrics s;
  if (span.empty()) {
    return s;
  }
  switch (task.kind) {
    case TaskKind::MultiLabel: {
      const std::vector<std::string> pred = parse_label_set(v, span);
      const std::set<std::string> gold(task.gold.labels().begin(), task.gold.labels().end());
      if (pred.empty()) {
        return s;
      }
      size_t hits = 0;
      for (const auto& label : pred) {
        hits += gold.count(label);
      }
      const size_t uni = pred.size() + gold.size() - hits;
      s.jaccard = uni == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(uni);
      if (hits > 0) {
        const double precision = static_cast<double>(hits) / static_cast<double>(pred.size());
        const double recall = static_cast<double>(hits) / static_cast<double>(gold.size());
        s.f1 = 2.0 * precision * recall / (precision + recall);
      }
      s.correct = s.jaccard == 1.0;
      break;
    }
    case TaskKind::NumericDistance: {
      const long long pred = parse_first_number(v, span);
      if (pred > 0) {
        const double rel = std::fabs(static_cast<double>(pred - task.gold.number())) /
                           static_cast<double>(task.gold.number());
        s.correct = rel <= numeric_band;
      }
      break;
    }
    case TaskKind::MultipleChoice:
    case TaskKind::NumericExact: {
      const std::vector<int> gold_tokens = canonical_answer_tokens(v, task.gold);
      s.correct = std::equal(span.begin(), span.end(), gold_tokens.begin(), gold_tokens.end());
      break;
    }
  }
  return s;
}

EvalReport evaluate(const PolicyParams& params, const Vocab& vocab,
                    const std::vector<TaskInstance>& suite, int max_new_tokens,
                    double numeric_band, std::vector<EvalOutput>* outputs) {
  if (suite.empty()) {
    throw std::invalid_argument("evaluation suite must be non-empty");
  }
  SamplerConfig greedy;
  greedy.temperature = 0.0;
  greedy.top_p = 1.0;
  greedy.max_new_tokens = max_new_tokens;

  EvalReport report;
  std::map<TaskKind, std::vector<InstanceMetrics>> scores;
  for (const TaskInstance& task : suite) {
    const PromptPair pair = render_prompts(vocab, task);
    const std::vector<int> generated =
        sample(params, pair.reasoning_context_prefix, greedy, vocab.eos);
    const StructuredOutput parsed = parse_structured_output(vocab, generated);
    const InstanceMetrics s =
        parsed.answer_span.has_value()
            ? score_answer_span(vocab, task, *parsed.answer_span, numeric_band)
            : InstanceMetrics{};
    scores[task.kind].push_back(s);

    if (outputs != nullptr) {
      EvalOutput out;
      out.task_id = task.id;
      out.kind = task.kind;
      out.generated = generated;
      out.reasoning_span = parsed.reasoning_span;
      out.answer_span = parsed.answer_span;
      out.length = generated.size();
      out.score = task.kind == TaskKind::MultiLabel ? s.f1 : (s.correct ? 1.0 : 0.0);
      outputs->push_back(std::move(out));
    }
  }

  for (const auto& [kind, list] : scores) {
    KindMetrics m;
    m.count = static_cast<int>(list.size());
    if (kind == TaskKind::MultiLabel) {
      m.has_f1 = true;
      for (const auto& s : list) {
        m.f1 += s.f1;
        m.jaccard += s.jaccard;
      }
      m.f1 /= m.count;
      m.jaccard /= m.count;
    } else {
      m.has_accuracy = true;
      int hits = 0;
      for (const auto& s : list) {
        hits += s.correct ? 1 : 0;
      }
      m.accuracy = static_cast<double>(hits) / m.count;
    }
    report.per_kind[kind] = m;
  }
  return report;
}

double token_prominence(const PolicyParams& params, std::span<const int> sequence,
                        const std::set<int>& marked_token_ids) {
  if (sequence.size() < 2) {
    throw std::invalid_argument("sequence too short for prominence");
  }
  const auto entries =
      teacher_forced_logits(params, sequence.subspan(0, 1), sequence.subspan(1));
  double all_sum = 0.0;
  double marked_sum = 0.0;
  size_t marked_n = 0;
  for (size_t k = 0; k < entries.size(); ++k) {
    all_sum += entries[k].logit;
    if (marked_token_ids.count(sequence[k + 1]) > 0) {
      marked_sum += entries[k].logit;
      ++marked_n;
    }
  }
  if (marked_n == 0) {
    throw std::invalid_argument("no marked token occurrence in sequence");
  }
  return marked_sum / static_cast<double>(marked_n) -
         all_sum / static_cast<double>(entries.size());
}

double answer_perplexity(const PolicyParams& scorer, std::span<const int> context,
                         std::span<const int> answer) {
  const auto entries = teacher_forced_logits(scorer, context, answer);
  double nll = 0.0;
  for (const auto& e : entries) {
    nll -= e.logprob;
  }
  return std::exp(nll / static_cast<double>(entries.size()));
}

double reasoning_quality_ppl(const PolicyParams& scorer, const Vocab& vocab,
                             const TaskInstance& task, std::span<const int> reasoning_span) {
  const PromptPair pair = render_prompts(vocab, task);
  const std::vector<int> ctx = assemble_reasoning_context(vocab, pair, reasoning_span);
  const std::vector<int> answer = canonical_answer_tokens(vocab, task.gold);
  return answer_perplexity(scorer, ctx, answer);
}

CorrelationReport correlation_report(std::span<const StepPoint> points) {
  const int n = static_cast<int>(points.size());
  if (n < 3) {
    throw std::invalid_argument("correlation report needs at least 3 steps");
  }
  CorrelationReport rep;
  for (int stage = 0; stage < 3; ++stage) {
    const int lo = stage * n / 3;
    const int hi = (stage + 1) * n / 3;
    auto& s = rep.stages[stage];
    s.steps = hi - lo;
    for (int i = lo; i < hi; ++i) {
      s.mean_dq += points[i].mean_dq;
      s.mean_reward += points[i].mean_reward;
    }
    s.mean_dq /= s.steps;
    s.mean_reward /= s.steps;
  }

  double mx = 0.0, my = 0.0;
  for (const auto& p : points) {
    mx += p.mean_dq;
    my += p.mean_reward;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (const auto& p : points) {
    const double dx = p.mean_dq - mx;
    const double dy = p.mean_reward - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) {
    rep.degenerate = true;
    rep.pearson_r = 0.0;
  } else {
    rep.pearson_r = sxy / std::sqrt(sxx * syy);
  }
  return rep;
}

LengthScoreTable length_score_table(std::span<const EvalOutput> baseline,
                                    std::span<const EvalOutput> candidate) {
  if (baseline.empty() || candidate.empty()) {
    throw std::invalid_argument("length/score table needs outputs from both runs");
  }
  std::unordered_map<std::string, const EvalOutput*> by_id;
  for (const auto& out : baseline) {
    by_id[out.task_id] = &out;
  }
  for (const auto& out : candidate) {
    if (by_id.count(out.task_id) == 0) {
      throw std::invalid_argument("candidate output for unknown task " + out.task_id);
    }
  }

  std::vector<size_t> lengths;
  lengths.reserve(baseline.size());
  for (const auto& out : baseline) {
    lengths.push_back(out.length);
  }
  std::sort(lengths.begin(), lengths.end());
  const double median = lengths.size() % 2 == 1
                            ? static_cast<double>(lengths[lengths.size() / 2])
                            : 0.5 * (static_cast<double>(lengths[lengths.size() / 2 - 1]) +
                                     static_cast<double>(lengths[lengths.size() / 2]));

  LengthScoreTable table;
  table.median_length = median;
  table.degenerate_split = lengths.front() == lengths.back();

  auto bucket_of = [&](const std::string& id) -> std::string {
    if (table.degenerate_split) {
      return "all";
    }
    return static_cast<double>(by_id.at(id)->length) <= median ? "short" : "long";
  };
  auto emit = [&](const char* run, std::span<const EvalOutput> outs, const std::string& bucket) {
    LengthScoreTable::Row row;
    row.run = run;
    row.bucket = bucket;
    for (const auto& out : outs) {
      if (bucket_of(out.task_id) != bucket) {
        continue;
      }
      row.mean_length += static_cast<double>(out.length);
      row.mean_score += out.score;
      ++row.count;
    }
    if (row.count > 0) {
      row.mean_length /= row.count;
      row.mean_score /= row.count;
      table.rows.push_back(std::move(row));
    }
  };

  const std::vector<std::string> buckets =
      table.degenerate_split ? std::vector<std::string>{"all"}
                             : std::vector<std::string>{"short", "long"};
  for (const auto& b : buckets) {
    emit("baseline", baseline, b);
    emit("candidate", candidate, b);
  }
  return table;
}

}  // namespace igrl
