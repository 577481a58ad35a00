#include "igrl/corpus.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>

#include "igrl/rng.hpp"

namespace igrl {

namespace {

const char* kLabels[] = {"arson",   "bribery", "forgery",   "larceny",
                         "perjury", "rioting", "smuggling", "trespass"};
// Two clue words per label, in label order.
const char* kClues[] = {"blaze",     "embers",   "kickback", "envelope", "signature", "inkpad",
                        "lockpick",  "satchel",  "oath",     "testimony", "mob",      "barricade",
                        "crate",     "border",   "fence",    "notice"};
const char* kCodes[] = {"alpha", "bravo", "delta", "kappa", "omega", "sigma", "theta", "zeta"};
constexpr int kNumLabels = 8;
constexpr int kNumClues = 16;
constexpr int kNumCodes = 8;
const char* kLetters[] = {"A", "B", "C", "D"};

int label_of_clue(int clue_index) { return clue_index / 2; }

void append_words(const Vocab& v, std::vector<int>& out, const std::string& text) {
  for (int id : v.encode(text)) {
    out.push_back(id);
  }
}

void append_number(const Vocab& v, std::vector<int>& out, long long n) {
  const std::string digits = std::to_string(n);
  for (char c : digits) {
    out.push_back(v.id(std::string(1, c)));
  }
}

std::vector<TaskInstance> make_kind(const Vocab& v, TaskKind kind, int count, Rng& rng,
                                    std::set<std::string>& seen_prompts) {
  std::vector<TaskInstance> out;
  const char* prefix = "";
  switch (kind) {
    case TaskKind::MultiLabel: prefix = "ml"; break;
    case TaskKind::NumericDistance: prefix = "nd"; break;
    case TaskKind::MultipleChoice: prefix = "mc"; break;
    case TaskKind::NumericExact: prefix = "ne"; break;
  }

  for (int i = 0; i < count; ++i) {
    TaskInstance task;
    task.kind = kind;
    {
      std::ostringstream id;
      id << prefix << "-";
      id.width(4);
      id.fill('0');
      id << i;
      task.id = id.str();
    }

    // Rejection loop: prompts are unique within a suite.
    for (int attempt = 0;; ++attempt) {
      if (attempt > 1000) {
        throw std::runtime_error("could not generate a unique prompt for " + task.id);
      }
      task.prompt.clear();
      switch (kind) {
        case TaskKind::MultiLabel: {
          const int n_clues = 1 + rng.uniform_int(4);
          std::vector<int> clues;
          for (int c = 0; c < n_clues; ++c) {
            int pick = rng.uniform_int(kNumClues);
            if (std::find(clues.begin(), clues.end(), pick) == clues.end()) {
              clues.push_back(pick);
            }
          }
          append_words(v, task.prompt, "case facts :");
          for (size_t c = 0; c < clues.size(); ++c) {
            if (c > 0) {
              task.prompt.push_back(v.id(","));
            }
            task.prompt.push_back(v.id(kClues[clues[c]]));
          }
          append_words(v, task.prompt, "; which charges apply ?");
          std::set<std::string> labels;
          for (int c : clues) {
            labels.insert(kLabels[label_of_clue(c)]);
          }
          task.gold.value = std::vector<std::string>(labels.begin(), labels.end());
          break;
        }
        case TaskKind::NumericDistance: {
          const int n = 2 + rng.uniform_int(3);
          long long total = 0;
          append_words(v, task.prompt, "counts :");
          for (int c = 0; c < n; ++c) {
            if (c > 0) {
              task.prompt.push_back(v.id(","));
            }
            const long long q = 1 + rng.uniform_int(99);
            total += q;
            append_number(v, task.prompt, q);
          }
          append_words(v, task.prompt, "; total term in months ?");
          task.gold.value = total;
          break;
        }
        case TaskKind::MultipleChoice: {
          const int key = rng.uniform_int(kNumCodes);
          const int slot = rng.uniform_int(4);
          std::vector<int> distractors;
          while (static_cast<int>(distractors.size()) < 3) {
            int pick = rng.uniform_int(kNumCodes);
            if (pick != key &&
                std::find(distractors.begin(), distractors.end(), pick) == distractors.end()) {
              distractors.push_back(pick);
            }
          }
          append_words(v, task.prompt, "statute code is");
          task.prompt.push_back(v.id(kCodes[key]));
          append_words(v, task.prompt, "; options :");
          int next_distractor = 0;
          for (int opt = 0; opt < 4; ++opt) {
            task.prompt.push_back(v.id(kLetters[opt]));
            task.prompt.push_back(
                v.id(kCodes[opt == slot ? key : distractors[next_distractor++]]));
          }
          append_words(v, task.prompt, "; choose one");
          task.gold.value = static_cast<char>('A' + slot);
          break;
        }
        case TaskKind::NumericExact: {
          const bool is_sum = rng.uniform01() < 0.5;
          const long long a = is_sum ? 1 + rng.uniform_int(99) : 2 + rng.uniform_int(11);
          const long long b = is_sum ? 1 + rng.uniform_int(99) : 2 + rng.uniform_int(11);
          append_words(v, task.prompt, "amount :");
          append_words(v, task.prompt, is_sum ? "sum of" : "product of");
          append_number(v, task.prompt, a);
          task.prompt.push_back(v.id("and"));
          append_number(v, task.prompt, b);
          task.prompt.push_back(v.id("?"));
          task.gold.value = is_sum ? a + b : a * b;
          break;
        }
      }
      const std::string rendered = v.decode(task.prompt);
      if (seen_prompts.insert(rendered).second) {
        break;
      }
    }
    out.push_back(std::move(task));
  }
  return out;
}

// Scans prompt tokens for maximal digit runs, returning the parsed integers.
std::vector<long long> digit_runs(const Vocab& v, std::span<const int> tokens) {
  std::vector<long long> out;
  long long cur = 0;
  bool in_run = false;
  for (int id : tokens) {
    if (v.is_digit(id)) {
      cur = cur * 10 + (v.token(id)[0] - '0');
      in_run = true;
    } else if (in_run) {
      out.push_back(cur);
      cur = 0;
      in_run = false;
    }
  }
  if (in_run) {
    out.push_back(cur);
  }
  return out;
}

}  // namespace

const char* kind_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::MultiLabel: return "multi_label";
    case TaskKind::NumericDistance: return "numeric_distance";
    case TaskKind::MultipleChoice: return "multiple_choice";
    case TaskKind::NumericExact: return "numeric_exact";
  }
  return "?";
}

std::optional<TaskKind> parse_kind(const std::string& name) {
  if (name == "multi_label") return TaskKind::MultiLabel;
  if (name == "numeric_distance") return TaskKind::NumericDistance;
  if (name == "multiple_choice") return TaskKind::MultipleChoice;
  if (name == "numeric_exact") return TaskKind::NumericExact;
  return std::nullopt;
}

std::vector<TaskInstance> generate_task_suite(const Vocab& vocab, uint64_t seed,
                                              const std::map<TaskKind, int>& counts_per_kind) {
  std::vector<TaskInstance> suite;
  std::set<std::string> seen_prompts;
  for (const auto& [kind, count] : counts_per_kind) {
    if (count < 0) {
      throw std::invalid_argument("negative task count");
    }
    Rng rng(Rng::mix(seed, static_cast<uint64_t>(kind)));
    auto tasks = make_kind(vocab, kind, count, rng, seen_prompts);
    for (auto& t : tasks) {
      suite.push_back(std::move(t));
    }
  }
  return suite;
}

PromptPair render_prompts(const Vocab& v, const TaskInstance& task) {
  PromptPair pair;
  pair.direct_context.push_back(v.bos);
  pair.direct_context.insert(pair.direct_context.end(), task.prompt.begin(), task.prompt.end());
  append_words(v, pair.direct_context, "; respond with the answer only :");
  pair.direct_context.push_back(v.answer_open);

  pair.reasoning_context_prefix.push_back(v.bos);
  pair.reasoning_context_prefix.insert(pair.reasoning_context_prefix.end(), task.prompt.begin(),
                                       task.prompt.end());
  append_words(v, pair.reasoning_context_prefix, "; think step by step ; use");
  pair.reasoning_context_prefix.push_back(v.reasoning_open);
  append_words(v, pair.reasoning_context_prefix, "then");
  pair.reasoning_context_prefix.push_back(v.answer_open);
  append_words(v, pair.reasoning_context_prefix, "tags :");
  return pair;
}

GoldTarget oracle_solve(const Vocab& v, const TaskInstance& task) {
  GoldTarget gold;
  switch (task.kind) {
    case TaskKind::MultiLabel: {
      std::set<std::string> labels;
      for (int id : task.prompt) {
        const std::string& tok = v.token(id);
        for (int c = 0; c < kNumClues; ++c) {
          if (tok == kClues[c]) {
            labels.insert(kLabels[label_of_clue(c)]);
          }
        }
      }
      if (labels.empty()) {
        throw std::runtime_error("oracle: no clues found in " + task.id);
      }
      gold.value = std::vector<std::string>(labels.begin(), labels.end());
      break;
    }
    case TaskKind::NumericDistance: {
      const auto runs = digit_runs(v, task.prompt);
      if (runs.empty()) {
        throw std::runtime_error("oracle: no quantities found in " + task.id);
      }
      long long total = 0;
      for (long long q : runs) {
        total += q;
      }
      gold.value = total;
      break;
    }
    case TaskKind::MultipleChoice: {
      // key = token after "is"; options follow the letter tokens.
      int key = -1;
      for (size_t i = 0; i + 1 < task.prompt.size(); ++i) {
        if (v.token(task.prompt[i]) == "is") {
          key = task.prompt[i + 1];
          break;
        }
      }
      if (key < 0) {
        throw std::runtime_error("oracle: no key found in " + task.id);
      }
      char letter = 0;
      for (size_t i = 0; i + 1 < task.prompt.size(); ++i) {
        const std::string& tok = v.token(task.prompt[i]);
        if (tok.size() == 1 && tok[0] >= 'A' && tok[0] <= 'D' && task.prompt[i + 1] == key) {
          letter = tok[0];
          break;
        }
      }
      if (letter == 0) {
        throw std::runtime_error("oracle: no matching option in " + task.id);
      }
      gold.value = letter;
      break;
    }
    case TaskKind::NumericExact: {
      const auto runs = digit_runs(v, task.prompt);
      if (runs.size() != 2) {
        throw std::runtime_error("oracle: expected two operands in " + task.id);
      }
      bool is_sum = false;
      bool is_product = false;
      for (int id : task.prompt) {
        if (v.token(id) == "sum") is_sum = true;
        if (v.token(id) == "product") is_product = true;
      }
      if (is_sum == is_product) {
        throw std::runtime_error("oracle: ambiguous operation in " + task.id);
      }
      gold.value = is_sum ? runs[0] + runs[1] : runs[0] * runs[1];
      break;
    }
  }
  return gold;
}

std::string canonical_answer(const GoldTarget& gold) {
  if (std::holds_alternative<std::vector<std::string>>(gold.value)) {
    auto labels = gold.labels();
    std::sort(labels.begin(), labels.end());
    std::string out;
    for (size_t i = 0; i < labels.size(); ++i) {
      if (i > 0) {
        out += " , ";
      }
      out += labels[i];
    }
    return out;
  }
  if (std::holds_alternative<long long>(gold.value)) {
    std::string digits = std::to_string(gold.number());
    std::string out;
    for (size_t i = 0; i < digits.size(); ++i) {
      if (i > 0) {
        out.push_back(' ');
      }
      out.push_back(digits[i]);
    }
    return out;
  }
  return std::string(1, gold.choice());
}

std::vector<int> canonical_answer_tokens(const Vocab& vocab, const GoldTarget& gold) {
  return vocab.encode(canonical_answer(gold));
}

GoldTarget parse_canonical_answer(TaskKind kind, const std::string& text) {
  GoldTarget gold;
  switch (kind) {
    case TaskKind::MultiLabel: {
      std::vector<std::string> labels;
      std::istringstream in(text);
      std::string word;
      while (in >> word) {
        if (word != ",") {
          labels.push_back(word);
        }
      }
      std::sort(labels.begin(), labels.end());
      gold.value = labels;
      break;
    }
    case TaskKind::NumericDistance:
    case TaskKind::NumericExact: {
      long long n = 0;
      bool any = false;
      for (char c : text) {
        if (c >= '0' && c <= '9') {
          n = n * 10 + (c - '0');
          any = true;
        } else if (c != ' ') {
          throw std::invalid_argument("bad numeric answer: " + text);
        }
      }
      if (!any) {
        throw std::invalid_argument("bad numeric answer: " + text);
      }
      gold.value = n;
      break;
    }
    case TaskKind::MultipleChoice: {
      std::string trimmed;
      for (char c : text) {
        if (c != ' ') {
          trimmed.push_back(c);
        }
      }
      if (trimmed.size() != 1 || trimmed[0] < 'A' || trimmed[0] > 'D') {
        throw std::invalid_argument("bad choice answer: " + text);
      }
      gold.value = trimmed[0];
      break;
    }
  }
  return gold;
}

std::vector<SftTrace> generate_sft_traces(const Vocab& v,
                                          const std::vector<TaskInstance>& suite, uint64_t seed) {
  std::vector<SftTrace> traces;
  traces.reserve(suite.size());
  for (const TaskInstance& task : suite) {
    const GoldTarget derived = oracle_solve(v, task);
    if (!(derived == task.gold)) {
      throw std::runtime_error("oracle disagrees with gold for task " + task.id);
    }
    Rng rng(Rng::mix(seed, Rng::hash_str(task.id.c_str())));

    SftTrace trace;
    trace.task_id = task.id;
    trace.context = render_prompts(v, task).reasoning_context_prefix;

    std::vector<int>& t = trace.target;
    t.push_back(v.reasoning_open);
    const char* connective = rng.uniform01() < 0.5 ? "implies" : "suggests";
    switch (task.kind) {
      case TaskKind::MultiLabel: {
        if (rng.uniform01() < 0.5) {
          append_words(v, t, "facts are");
          bool first = true;
          for (int id : task.prompt) {
            for (int c = 0; c < kNumClues; ++c) {
              if (v.token(id) == kClues[c]) {
                if (!first) {
                  t.push_back(v.id(","));
                }
                t.push_back(id);
                first = false;
              }
            }
          }
          t.push_back(v.id(";"));
        }
        for (int id : task.prompt) {
          for (int c = 0; c < kNumClues; ++c) {
            if (v.token(id) == kClues[c]) {
              append_words(v, t, "clue");
              t.push_back(id);
              t.push_back(v.id(connective));
              t.push_back(v.id(kLabels[label_of_clue(c)]));
              t.push_back(v.id(";"));
            }
          }
        }
        append_words(v, t, "therefore charges are");
        append_words(v, t, canonical_answer(task.gold));
        break;
      }
      case TaskKind::NumericDistance: {
        const auto runs = digit_runs(v, task.prompt);
        append_words(v, t, "counts are");
        for (size_t i = 0; i < runs.size(); ++i) {
          if (i > 0) {
            t.push_back(v.id(","));
          }
          append_number(v, t, runs[i]);
        }
        append_words(v, t, "; sum of");
        for (size_t i = 0; i < runs.size(); ++i) {
          if (i > 0) {
            t.push_back(v.id("and"));
          }
          append_number(v, t, runs[i]);
        }
        t.push_back(v.id("is"));
        append_number(v, t, task.gold.number());
        append_words(v, t, "; term is");
        append_number(v, t, task.gold.number());
        break;
      }
      case TaskKind::MultipleChoice: {
        int key = -1;
        for (size_t i = 0; i + 1 < task.prompt.size(); ++i) {
          if (v.token(task.prompt[i]) == "is") {
            key = task.prompt[i + 1];
            break;
          }
        }
        append_words(v, t, "code is");
        t.push_back(key);
        append_words(v, t, "; option");
        t.push_back(v.id(std::string(1, task.gold.choice())));
        t.push_back(v.id("matches"));
        t.push_back(key);
        append_words(v, t, "; so choose");
        t.push_back(v.id(std::string(1, task.gold.choice())));
        break;
      }
      case TaskKind::NumericExact: {
        const auto runs = digit_runs(v, task.prompt);
        bool is_sum = false;
        for (int id : task.prompt) {
          if (v.token(id) == "sum") {
            is_sum = true;
          }
        }
        append_words(v, t, is_sum ? "sum of" : "product of");
        append_number(v, t, runs[0]);
        t.push_back(v.id("and"));
        append_number(v, t, runs[1]);
        t.push_back(v.id("is"));
        append_number(v, t, task.gold.number());
        if (rng.uniform01() < 0.5) {
          append_words(v, t, "; so the answer is");
          append_number(v, t, task.gold.number());
        }
        break;
      }
    }
    t.push_back(v.reasoning_close);
    t.push_back(v.answer_open);
    append_words(v, t, canonical_answer(task.gold));
    t.push_back(v.answer_close);
    t.push_back(v.eos);

    traces.push_back(std::move(trace));
  }
  return traces;
}

std::vector<int> label_inventory_ids(const Vocab& vocab) {
  std::vector<int> ids;
  for (const char* l : kLabels) {
    ids.push_back(vocab.id(l));
  }
  return ids;
}

}  // namespace igrl
