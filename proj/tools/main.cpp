// Command-line pipeline: gen-corpus -> train (sft, grpo) -> eval -> analyze.
// Every artifact embeds the effective config hash, the seed and a format
// version; reruns with identical inputs are byte-identical.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <set>
#include <unordered_map>

#include "igrl/artifacts.hpp"
#include "igrl/config.hpp"
#include "igrl/corpus.hpp"
#include "igrl/grpo.hpp"
#include "igrl/policy.hpp"
#include "igrl/rng.hpp"
#include "igrl/sft.hpp"
#include "igrl/telemetry.hpp"

namespace fs = std::filesystem;
using namespace igrl;

namespace {

struct CommonArgs {
  std::string config_path;
  int64_t seed_override = -1;
  std::string mode_override;
  std::string out_dir = "runs/out";
};

RunConfig effective_config(const CommonArgs& args) {
  RunConfig cfg = args.config_path.empty() ? RunConfig{} : load_config(args.config_path);
  if (args.seed_override >= 0) {
    cfg.seed = static_cast<uint64_t>(args.seed_override);
  }
  if (!args.mode_override.empty()) {
    const auto mode = parse_reward_mode(args.mode_override);
    if (!mode.has_value()) {
      throw std::invalid_argument("--mode expects info_gain|legal_only, got '" +
                                  args.mode_override + "'");
    }
    cfg.rewards.mode = *mode;
  }
  cfg.validate();
  return cfg;
}

ArtifactHeader make_header(const RunConfig& cfg) {
  ArtifactHeader h;
  h.config_hash = hash_hex(cfg.config_hash());
  h.seed = cfg.seed;
  return h;
}

std::string checkpoint_id(const CheckpointMeta& meta) {
  return hash_hex(meta.config_hash) + "-" + std::to_string(meta.seed);
}

std::map<TaskKind, int> sft_counts(int total) {
  std::map<TaskKind, int> counts;
  const TaskKind kinds[] = {TaskKind::MultiLabel, TaskKind::NumericDistance,
                            TaskKind::MultipleChoice, TaskKind::NumericExact};
  for (int i = 0; i < 4; ++i) {
    counts[kinds[i]] = total / 4 + (i < total % 4 ? 1 : 0);
  }
  return counts;
}

int cmd_gen_corpus(const CommonArgs& args) {
  const RunConfig cfg = effective_config(args);
  const Vocab vocab = Vocab::builtin();
  const fs::path dir = cfg.paths.corpus_dir;
  fs::create_directories(dir);

  const auto train = generate_task_suite(vocab, Rng::mix(cfg.seed, 0x7261), cfg.corpus.train_counts);
  const auto eval = generate_task_suite(vocab, Rng::mix(cfg.seed, 0x6576), cfg.corpus.eval_counts);
  const auto sft_suite =
      generate_task_suite(vocab, Rng::mix(cfg.seed, 0x5346), sft_counts(cfg.corpus.sft_traces));
  const auto traces = generate_sft_traces(vocab, sft_suite, Rng::mix(cfg.seed, 0x7472));

  const ArtifactHeader header = make_header(cfg);
  save_vocab((dir / "vocab.txt").string(), vocab);
  save_tasks((dir / "tasks_train.jsonl").string(), train, vocab, header);
  save_tasks((dir / "tasks_eval.jsonl").string(), eval, vocab, header);
  save_traces((dir / "traces_sft.jsonl").string(), traces, vocab, header);

  std::cout << "corpus: " << train.size() << " train tasks, " << eval.size() << " eval tasks, "
            << traces.size() << " sft traces -> " << dir.string() << "\n";
  return 0;
}

Vocab load_corpus_vocab(const RunConfig& cfg) {
  const fs::path path = fs::path(cfg.paths.corpus_dir) / "vocab.txt";
  if (!fs::exists(path)) {
    throw std::runtime_error("missing vocabulary file (run gen-corpus first): " + path.string());
  }
  return load_vocab(path.string());
}

int cmd_train(const CommonArgs& args, const std::string& stage, std::string checkpoint_path,
              bool from_scratch) {
  const RunConfig cfg = effective_config(args);
  const Vocab vocab = load_corpus_vocab(cfg);
  const fs::path out = args.out_dir;
  fs::create_directories(out);
  const ArtifactHeader header = make_header(cfg);
  const PolicyConfig pcfg = cfg.policy_config(vocab.size());

  CheckpointMeta meta;
  meta.format_version = kArtifactFormatVersion;
  meta.seed = cfg.seed;
  meta.config_hash = cfg.config_hash();

  if (stage == "sft") {
    const auto traces = load_traces(
        (fs::path(cfg.paths.corpus_dir) / "traces_sft.jsonl").string(), vocab);
    if (traces.empty()) {
      throw std::runtime_error("no sft traces found in " + cfg.paths.corpus_dir);
    }
    PolicyParams params = PolicyParams::init(pcfg, cfg.seed);
    const SftRunResult result = run_sft(params, traces, cfg.sft_config());
    save_checkpoint((out / "sft.ckpt").string(), params, meta);

    const SftConfig sft_cfg = cfg.sft_config();
    const int total_steps = static_cast<int>(result.loss_curve.size());
    JsonlWriter log((out / "sft_loss.jsonl").string(), header);
    for (int step = 0; step < total_steps; ++step) {
      nlohmann::json rec;
      rec["record"] = "loss";
      rec["step"] = step;
      rec["lr"] = lr_at_step(sft_cfg, step, total_steps);
      rec["loss"] = result.loss_curve[static_cast<size_t>(step)];
      log.write(rec);
    }
    std::cout << "sft: " << total_steps << " steps, final loss "
              << (result.loss_curve.empty() ? 0.0 : result.loss_curve.back()) << " -> "
              << (out / "sft.ckpt").string() << "\n";
    return 0;
  }

  if (stage == "grpo") {
    const auto suite = load_tasks(
        (fs::path(cfg.paths.corpus_dir) / "tasks_train.jsonl").string(), vocab);
    if (suite.empty()) {
      throw std::runtime_error("no training tasks found in " + cfg.paths.corpus_dir);
    }
    PolicyParams params = [&] {
      if (from_scratch) {
        return PolicyParams::init(pcfg, cfg.seed);
      }
      if (checkpoint_path.empty()) {
        checkpoint_path = (out / "sft.ckpt").string();
      }
      if (!fs::exists(checkpoint_path)) {
        throw std::runtime_error("missing initial checkpoint: " + checkpoint_path);
      }
      return load_checkpoint_expecting(checkpoint_path, pcfg);
    }();

    ArtifactHeader log_header = header;
    log_header.extra["mode"] = reward_mode_name(cfg.rewards.mode);
    JsonlWriter log((out / "grpo_log.jsonl").string(), log_header);

    GrpoRunHooks hooks;
    hooks.on_step = [&log](const GrpoStepRecord& rec) {
      log.write(step_record_json(rec));
      for (const auto& traj : trajectory_record_jsons(rec)) {
        log.write(traj);
      }
    };
    hooks.on_checkpoint = [&](int /*step*/, const PolicyParams& p) {
      save_checkpoint((out / "grpo.ckpt").string(), p, meta);
    };

    run_grpo(params, vocab, suite, cfg.grpo_config(),
             cfg.sampler_config(Rng::mix(cfg.seed, 0x73616d70)), cfg.info_config(),
             cfg.distance_config(), hooks);
    std::cout << "grpo: " << cfg.grpo.steps << " steps, mode "
              << reward_mode_name(cfg.rewards.mode) << " -> " << (out / "grpo.ckpt").string()
              << "\n";
    return 0;
  }

  throw std::invalid_argument("--stage expects sft|grpo, got '" + stage + "'");
}

int cmd_eval(const CommonArgs& args, std::string checkpoint_path) {
  const RunConfig cfg = effective_config(args);
  const Vocab vocab = load_corpus_vocab(cfg);
  const fs::path out = args.out_dir;
  fs::create_directories(out);

  if (checkpoint_path.empty()) {
    checkpoint_path = (out / "grpo.ckpt").string();
  }
  if (!fs::exists(checkpoint_path)) {
    throw std::runtime_error("missing checkpoint: " + checkpoint_path);
  }
  CheckpointMeta meta;
  const PolicyParams params =
      load_checkpoint_expecting(checkpoint_path, cfg.policy_config(vocab.size()), &meta);

  const auto suite =
      load_tasks((fs::path(cfg.paths.corpus_dir) / "tasks_eval.jsonl").string(), vocab);
  if (suite.empty()) {
    throw std::runtime_error("no eval tasks found in " + cfg.paths.corpus_dir);
  }

  std::vector<EvalOutput> outputs;
  EvalReport report = evaluate(params, vocab, suite, cfg.sampler.max_new_tokens,
                               cfg.telemetry.numeric_band, &outputs);
  report.mode = reward_mode_name(cfg.rewards.mode);
  report.checkpoint_id = checkpoint_id(meta);

  ArtifactHeader header = make_header(cfg);
  header.extra["mode"] = report.mode;
  header.extra["checkpoint_id"] = report.checkpoint_id;
  save_eval_report((out / "eval_report.jsonl").string(), report, header);
  save_eval_outputs((out / "eval_outputs.jsonl").string(), outputs, vocab, header);

  for (const auto& [kind, m] : report.per_kind) {
    std::cout << "eval " << kind_name(kind) << ": ";
    if (m.has_f1) {
      std::cout << "f1 " << m.f1 << ", jaccard " << m.jaccard;
    } else {
      std::cout << "accuracy " << m.accuracy;
    }
    std::cout << " (" << m.count << " tasks)\n";
  }
  return 0;
}

int cmd_analyze(const CommonArgs& args, const std::vector<std::string>& logs,
                const std::vector<std::string>& output_files, const std::string& ckpt) {
  const RunConfig cfg = effective_config(args);
  const fs::path out = args.out_dir;
  fs::create_directories(out);
  const ArtifactHeader header = make_header(cfg);

  if (logs.empty() && output_files.empty()) {
    throw std::invalid_argument("analyze needs at least one --log or --outputs file");
  }
  for (const auto& p : logs) {
    if (!fs::exists(p)) {
      throw std::runtime_error("missing run log: " + p);
    }
  }
  for (const auto& p : output_files) {
    if (!fs::exists(p)) {
      throw std::runtime_error("missing eval outputs file: " + p);
    }
  }

  std::vector<RunLogData> log_data;
  for (const auto& p : logs) {
    log_data.push_back(load_run_log(p));
  }

  if (!log_data.empty()) {
    write_fig3_logits((out / "fig3_logits.jsonl").string(), log_data.front(), header);

    std::vector<StepPoint> points;
    for (const auto& s : log_data.front().steps) {
      points.push_back({s.mean_dq, s.mean_legal});
    }
    write_fig4_correlation((out / "fig4_correlation.jsonl").string(),
                           correlation_report(points), header);

    std::vector<std::pair<std::string, const RunLogData*>> runs;
    for (size_t i = 0; i < log_data.size(); ++i) {
      std::string label = log_data[i].header.extra.count("mode")
                              ? log_data[i].header.extra.at("mode")
                              : "run";
      label += "-" + std::to_string(i);
      runs.emplace_back(label, &log_data[i]);
    }
    write_fig4_variance((out / "fig4_variance.jsonl").string(), runs, header);
  }

  if (!output_files.empty() && !ckpt.empty()) {
    if (!fs::exists(ckpt)) {
      throw std::runtime_error("missing checkpoint: " + ckpt);
    }
    const Vocab vocab = load_corpus_vocab(cfg);
    const PolicyParams scorer =
        load_checkpoint_expecting(ckpt, cfg.policy_config(vocab.size()));
    const auto suite =
        load_tasks((fs::path(cfg.paths.corpus_dir) / "tasks_eval.jsonl").string(), vocab);
    std::unordered_map<std::string, const TaskInstance*> by_id;
    for (const auto& t : suite) {
      by_id[t.id] = &t;
    }
    const auto outputs = load_eval_outputs(output_files.front(), vocab);
    const auto marked_vec = label_inventory_ids(vocab);
    const std::set<int> marked(marked_vec.begin(), marked_vec.end());

    std::vector<std::pair<std::string, double>> prominence, ppl;
    for (const auto& o : outputs) {
      const auto it = by_id.find(o.task_id);
      if (it == by_id.end()) {
        continue;
      }
      const PromptPair pair = render_prompts(vocab, *it->second);
      std::vector<int> seq = pair.reasoning_context_prefix;
      seq.insert(seq.end(), o.generated.begin(), o.generated.end());
      bool any_marked = false;
      for (size_t i = 1; i < seq.size(); ++i) {
        any_marked = any_marked || marked.count(seq[i]) > 0;
      }
      if (any_marked) {
        prominence.emplace_back(o.task_id, token_prominence(scorer, seq, marked));
      }
      if (o.reasoning_span.has_value()) {
        ppl.emplace_back(o.task_id,
                         reasoning_quality_ppl(scorer, vocab, *it->second, *o.reasoning_span));
      }
    }
    write_scalar_series((out / "fig5_prominence.jsonl").string(), "prominence", prominence,
                        header);
    write_scalar_series((out / "fig5_ppl.jsonl").string(), "ppl", ppl, header);
  }

  if (output_files.size() >= 2) {
    const Vocab vocab = load_corpus_vocab(cfg);
    const auto baseline = load_eval_outputs(output_files[0], vocab);
    const auto candidate = load_eval_outputs(output_files[1], vocab);
    write_table4_lengths((out / "table4_lengths.jsonl").string(),
                         length_score_table(baseline, candidate), header);
  }

  std::cout << "analyze: wrote figure data to " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"toy RLVR pipeline with information-gain reward shaping"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string stage = "sft";
  std::string checkpoint;
  bool from_scratch = false;
  std::vector<std::string> logs, output_files;

  auto add_common = [&common](CLI::App* cmd) {
    cmd->add_option("--config", common.config_path, "config file (key = value lines)");
    cmd->add_option("--seed", common.seed_override, "seed override");
    cmd->add_option("--out", common.out_dir, "output directory");
    cmd->add_option("--mode", common.mode_override, "reward mode override");
  };

  CLI::App* gen = app.add_subcommand("gen-corpus", "generate task suites and sft traces");
  add_common(gen);

  CLI::App* train = app.add_subcommand("train", "train a stage (sft or grpo)");
  add_common(train);
  train->add_option("--stage", stage, "sft|grpo")->required();
  train->add_option("--checkpoint", checkpoint, "initial checkpoint for grpo");
  train->add_flag("--from-scratch", from_scratch, "start grpo from a fresh initialization");

  CLI::App* eval_cmd = app.add_subcommand("eval", "greedy evaluation of a checkpoint");
  add_common(eval_cmd);
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint to evaluate");

  CLI::App* analyze = app.add_subcommand("analyze", "emit figure/table analog data files");
  add_common(analyze);
  analyze->add_option("--log", logs, "run log (repeatable)");
  analyze->add_option("--outputs", output_files, "eval outputs file (repeatable)");
  analyze->add_option("--checkpoint", checkpoint, "scorer checkpoint for token analyses");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      return cmd_gen_corpus(common);
    }
    if (train->parsed()) {
      return cmd_train(common, stage, checkpoint, from_scratch);
    }
    if (eval_cmd->parsed()) {
      return cmd_eval(common, checkpoint);
    }
    if (analyze->parsed()) {
      return cmd_analyze(common, logs, output_files, checkpoint);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
