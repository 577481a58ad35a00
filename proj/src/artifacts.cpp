#include "igrl/artifacts.hpp"

#include <stdexcept>

namespace igrl {

using nlohmann::json;

namespace {

json header_json(const ArtifactHeader& h) {
  json rec;
  rec["record"] = "header";
  rec["format_version"] = h.format_version;
  rec["config_hash"] = h.config_hash;
  rec["seed"] = h.seed;
  for (const auto& [k, v] : h.extra) {
    rec[k] = v;
  }
  return rec;
}

ArtifactHeader parse_header(const json& rec) {
  ArtifactHeader h;
  h.format_version = rec.at("format_version").get<uint32_t>();
  if (h.format_version != kArtifactFormatVersion) {
    throw std::runtime_error("unsupported artifact format version " +
                             std::to_string(h.format_version));
  }
  h.config_hash = rec.at("config_hash").get<std::string>();
  h.seed = rec.at("seed").get<uint64_t>();
  for (const auto& [k, v] : rec.items()) {
    if (k != "record" && k != "format_version" && k != "config_hash" && k != "seed" &&
        v.is_string()) {
      h.extra[k] = v.get<std::string>();
    }
  }
  return h;
}

}  // namespace

JsonlWriter::JsonlWriter(const std::string& path, const ArtifactHeader& header)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
  if (!out_) {
    throw std::runtime_error("cannot open artifact for writing: " + path);
  }
  write(header_json(header));
}

void JsonlWriter::write(const json& record) {
  out_ << record.dump() << '\n';
  if (!out_) {
    throw std::runtime_error("failed writing artifact: " + path_);
  }
}

std::vector<json> read_jsonl(const std::string& path, ArtifactHeader* header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open artifact: " + path);
  }
  std::vector<json> records;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    json rec = json::parse(line);
    if (first && rec.value("record", "") == "header") {
      if (header != nullptr) {
        *header = parse_header(rec);
      }
      first = false;
      continue;
    }
    first = false;
    records.push_back(std::move(rec));
  }
  return records;
}

// --- corpus files ------------------------------------------------------------

void save_vocab(const std::string& path, const Vocab& vocab) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open vocab file for writing: " + path);
  }
  for (const auto& tok : vocab.tokens()) {
    out << tok << '\n';
  }
}

Vocab load_vocab(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open vocab file: " + path);
  }
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) {
      tokens.push_back(line);
    }
  }
  return Vocab::from_tokens(tokens);
}

void save_tasks(const std::string& path, const std::vector<TaskInstance>& tasks,
                const Vocab& vocab, const ArtifactHeader& header) {
  JsonlWriter out(path, header);
  for (const auto& task : tasks) {
    json rec;
    rec["record"] = "task";
    rec["id"] = task.id;
    rec["kind"] = kind_name(task.kind);
    rec["prompt"] = vocab.decode(task.prompt);
    rec["gold"] = canonical_answer(task.gold);
    out.write(rec);
  }
}

std::vector<TaskInstance> load_tasks(const std::string& path, const Vocab& vocab,
                                     ArtifactHeader* header) {
  std::vector<TaskInstance> tasks;
  for (const auto& rec : read_jsonl(path, header)) {
    if (rec.value("record", "") != "task") {
      continue;
    }
    TaskInstance task;
    task.id = rec.at("id").get<std::string>();
    const auto kind = parse_kind(rec.at("kind").get<std::string>());
    if (!kind.has_value()) {
      throw std::runtime_error("unknown task kind in " + path + ": " +
                               rec.at("kind").get<std::string>());
    }
    task.kind = *kind;
    task.prompt = vocab.encode(rec.at("prompt").get<std::string>());
    task.gold = parse_canonical_answer(task.kind, rec.at("gold").get<std::string>());
    tasks.push_back(std::move(task));
  }
  return tasks;
}

void save_traces(const std::string& path, const std::vector<SftTrace>& traces,
                 const Vocab& vocab, const ArtifactHeader& header) {
  JsonlWriter out(path, header);
  for (const auto& trace : traces) {
    json rec;
    rec["record"] = "trace";
    rec["id"] = trace.task_id;
    rec["context"] = vocab.decode(trace.context);
    rec["target"] = vocab.decode(trace.target);
    out.write(rec);
  }
}

std::vector<SftTrace> load_traces(const std::string& path, const Vocab& vocab,
                                  ArtifactHeader* header) {
  std::vector<SftTrace> traces;
  for (const auto& rec : read_jsonl(path, header)) {
    if (rec.value("record", "") != "trace") {
      continue;
    }
    SftTrace trace;
    trace.task_id = rec.at("id").get<std::string>();
    trace.context = vocab.encode(rec.at("context").get<std::string>());
    trace.target = vocab.encode(rec.at("target").get<std::string>());
    traces.push_back(std::move(trace));
  }
  return traces;
}

// --- run logs ----------------------------------------------------------------

json step_record_json(const GrpoStepRecord& rec) {
  json j;
  j["record"] = "step";
  j["step"] = rec.step;
  j["task_id"] = rec.task_id;
  j["mode"] = reward_mode_name(rec.mode);
  j["rewards"] = rec.rewards;
  j["advantages"] = rec.advantages;
  j["mean_dq"] = rec.stats.mean_dq;
  j["mean_legal"] = rec.stats.mean_legal;
  j["mean_modulation"] = rec.stats.mean_modulation;
  j["reward_mean"] = rec.stats.reward_mean;
  j["reward_var"] = rec.stats.reward_std * rec.stats.reward_std;
  j["kl"] = rec.stats.mean_kl;
  j["grad_norm"] = rec.stats.grad_norm;
  j["logit_direct"] = rec.stats.mean_logit_direct;
  j["logit_reasoning"] = rec.stats.mean_logit_reasoning;
  return j;
}

std::vector<json> trajectory_record_jsons(const GrpoStepRecord& rec) {
  std::vector<json> out;
  for (size_t i = 0; i < rec.breakdowns.size(); ++i) {
    const RewardBreakdown& b = rec.breakdowns[i];
    json j;
    j["record"] = "trajectory";
    j["step"] = rec.step;
    j["task_id"] = rec.task_id;
    j["group_index"] = i;
    j["mode"] = reward_mode_name(rec.mode);
    j["r_format"] = b.r_format;
    j["r_legal"] = b.r_legal;
    j["delta_q"] = b.delta_q;
    j["modulation"] = b.modulation;
    j["r_info"] = b.r_info;
    j["total"] = b.total;
    j["dq_defined"] = b.dq_defined;
    j["length"] = rec.lengths[i];
    out.push_back(std::move(j));
  }
  return out;
}

RunLogData load_run_log(const std::string& path) {
  RunLogData data;
  for (const auto& rec : read_jsonl(path, &data.header)) {
    if (rec.value("record", "") != "step") {
      continue;
    }
    RunLogStep s;
    s.step = rec.at("step").get<int>();
    s.task_id = rec.at("task_id").get<std::string>();
    s.mode = rec.at("mode").get<std::string>();
    s.rewards = rec.at("rewards").get<std::vector<double>>();
    s.advantages = rec.at("advantages").get<std::vector<double>>();
    s.mean_dq = rec.at("mean_dq").get<double>();
    s.mean_legal = rec.at("mean_legal").get<double>();
    s.mean_modulation = rec.at("mean_modulation").get<double>();
    s.reward_mean = rec.at("reward_mean").get<double>();
    s.reward_var = rec.at("reward_var").get<double>();
    s.kl = rec.at("kl").get<double>();
    s.grad_norm = rec.at("grad_norm").get<double>();
    s.logit_direct = rec.at("logit_direct").get<double>();
    s.logit_reasoning = rec.at("logit_reasoning").get<double>();
    data.steps.push_back(std::move(s));
  }
  return data;
}

// --- evaluation --------------------------------------------------------------

void save_eval_report(const std::string& path, const EvalReport& report,
                      const ArtifactHeader& header) {
  JsonlWriter out(path, header);
  for (const auto& [kind, m] : report.per_kind) {
    json rec;
    rec["record"] = "kind_metrics";
    rec["kind"] = kind_name(kind);
    rec["count"] = m.count;
    if (m.has_f1) {
      rec["f1"] = m.f1;
      rec["jaccard"] = m.jaccard;
    }
    if (m.has_accuracy) {
      rec["accuracy"] = m.accuracy;
    }
    out.write(rec);
  }
}

void save_eval_outputs(const std::string& path, const std::vector<EvalOutput>& outputs,
                       const Vocab& vocab, const ArtifactHeader& header) {
  JsonlWriter out(path, header);
  for (const auto& o : outputs) {
    json rec;
    rec["record"] = "output";
    rec["id"] = o.task_id;
    rec["kind"] = kind_name(o.kind);
    rec["length"] = o.length;
    rec["score"] = o.score;
    rec["text"] = vocab.decode(o.generated);
    rec["reasoning"] =
        o.reasoning_span.has_value() ? json(vocab.decode(*o.reasoning_span)) : json();
    rec["answer"] = o.answer_span.has_value() ? json(vocab.decode(*o.answer_span)) : json();
    out.write(rec);
  }
}

std::vector<EvalOutput> load_eval_outputs(const std::string& path, const Vocab& vocab,
                                          ArtifactHeader* header) {
  std::vector<EvalOutput> outputs;
  for (const auto& rec : read_jsonl(path, header)) {
    if (rec.value("record", "") != "output") {
      continue;
    }
    EvalOutput o;
    o.task_id = rec.at("id").get<std::string>();
    const auto kind = parse_kind(rec.at("kind").get<std::string>());
    if (!kind.has_value()) {
      throw std::runtime_error("unknown task kind in " + path);
    }
    o.kind = *kind;
    o.length = rec.at("length").get<size_t>();
    o.score = rec.at("score").get<double>();
    o.generated = vocab.encode(rec.at("text").get<std::string>());
    if (!rec.at("reasoning").is_null()) {
      o.reasoning_span = vocab.encode(rec.at("reasoning").get<std::string>());
    }
    if (!rec.at("answer").is_null()) {
      o.answer_span = vocab.encode(rec.at("answer").get<std::string>());
    }
    outputs.push_back(std::move(o));
  }
  return outputs;
}

// --- figure/table analog emitters ---------------------------------------------

void write_fig3_logits(const std::string& path, const RunLogData& log,
                       const ArtifactHeader& header) {
  JsonlWriter out(path, header);
  for (const auto& s : log.steps) {
    json rec;
    rec["record"] = "fig3";
    rec["step"] = s.step;
    rec["logit_direct"] = s.logit_direct;
    rec["logit_reasoning"] = s.logit_reasoning;
    out.write(rec);
  }
}

void write_fig4_correlation(const std::string& path, const CorrelationReport& report,
                            const ArtifactHeader& header) {
  JsonlWriter out(path, header);
  for (int i = 0; i < 3; ++i) {
    json rec;
    rec["record"] = "stage";
    rec["stage"] = i;
    rec["steps"] = report.stages[i].steps;
    rec["mean_dq"] = report.stages[i].mean_dq;
    rec["mean_reward"] = report.stages[i].mean_reward;
    out.write(rec);
  }
  json rec;
  rec["record"] = "pearson";
  rec["r"] = report.pearson_r;
  rec["degenerate"] = report.degenerate;
  out.write(rec);
}

void write_fig4_variance(const std::string& path,
                         const std::vector<std::pair<std::string, const RunLogData*>>& runs,
                         const ArtifactHeader& header) {
  JsonlWriter out(path, header);
  for (const auto& [label, log] : runs) {
    for (const auto& s : log->steps) {
      json rec;
      rec["record"] = "variance";
      rec["run"] = label;
      rec["step"] = s.step;
      rec["reward_var"] = s.reward_var;
      out.write(rec);
    }
  }
}

void write_scalar_series(const std::string& path, const std::string& record_name,
                         const std::vector<std::pair<std::string, double>>& values,
                         const ArtifactHeader& header) {
  JsonlWriter out(path, header);
  for (const auto& [id, value] : values) {
    json rec;
    rec["record"] = record_name;
    rec["id"] = id;
    rec["value"] = value;
    out.write(rec);
  }
}

void write_table4_lengths(const std::string& path, const LengthScoreTable& table,
                          const ArtifactHeader& header) {
  JsonlWriter out(path, header);
  {
    json rec;
    rec["record"] = "split";
    rec["median_length"] = table.median_length;
    rec["degenerate"] = table.degenerate_split;
    out.write(rec);
  }
  for (const auto& row : table.rows) {
    json rec;
    rec["record"] = "bucket";
    rec["run"] = row.run;
    rec["bucket"] = row.bucket;
    rec["count"] = row.count;
    rec["mean_length"] = row.mean_length;
    rec["mean_score"] = row.mean_score;
    out.write(rec);
  }
}

}  // namespace igrl
