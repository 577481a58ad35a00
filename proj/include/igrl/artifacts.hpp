#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "igrl/corpus.hpp"
#include "igrl/grpo.hpp"
#include "igrl/telemetry.hpp"
#include "igrl/vocab.hpp"

// Line-delimited JSON artifacts. Every file starts with a header record
// {"record":"header","format_version":1,"config_hash":...,"seed":...} plus
// any producer-specific fields; data records follow one per line. Field
// names are part of the interchange contract and documented in the README.

namespace igrl {

inline constexpr uint32_t kArtifactFormatVersion = 1;

struct ArtifactHeader {
  uint32_t format_version = kArtifactFormatVersion;
  std::string config_hash;
  uint64_t seed = 0;
  std::map<std::string, std::string> extra;
};

class JsonlWriter {
 public:
  JsonlWriter(const std::string& path, const ArtifactHeader& header);
  void write(const nlohmann::json& record);

 private:
  std::ofstream out_;
  std::string path_;
};

// Returns the data records; the header, when present, goes to *header.
std::vector<nlohmann::json> read_jsonl(const std::string& path,
                                       ArtifactHeader* header = nullptr);

// --- corpus files ---------------------------------------------------------

void save_vocab(const std::string& path, const Vocab& vocab);
Vocab load_vocab(const std::string& path);

void save_tasks(const std::string& path, const std::vector<TaskInstance>& tasks,
                const Vocab& vocab, const ArtifactHeader& header);
std::vector<TaskInstance> load_tasks(const std::string& path, const Vocab& vocab,
                                     ArtifactHeader* header = nullptr);

void save_traces(const std::string& path, const std::vector<SftTrace>& traces,
                 const Vocab& vocab, const ArtifactHeader& header);
std::vector<SftTrace> load_traces(const std::string& path, const Vocab& vocab,
                                  ArtifactHeader* header = nullptr);

// --- run logs --------------------------------------------------------------

nlohmann::json step_record_json(const GrpoStepRecord& rec);
std::vector<nlohmann::json> trajectory_record_jsons(const GrpoStepRecord& rec);

struct RunLogStep {
  int step = 0;
  std::string task_id;
  std::string mode;
  std::vector<double> rewards;
  std::vector<double> advantages;
  double mean_dq = 0.0;
  double mean_legal = 0.0;
  double mean_modulation = 0.0;
  double reward_mean = 0.0;
  double reward_var = 0.0;
  double kl = 0.0;
  double grad_norm = 0.0;
  double logit_direct = 0.0;
  double logit_reasoning = 0.0;
};

struct RunLogData {
  ArtifactHeader header;
  std::vector<RunLogStep> steps;
};

RunLogData load_run_log(const std::string& path);

// --- evaluation ------------------------------------------------------------

void save_eval_report(const std::string& path, const EvalReport& report,
                      const ArtifactHeader& header);
void save_eval_outputs(const std::string& path, const std::vector<EvalOutput>& outputs,
                       const Vocab& vocab, const ArtifactHeader& header);
std::vector<EvalOutput> load_eval_outputs(const std::string& path, const Vocab& vocab,
                                          ArtifactHeader* header = nullptr);

// --- figure/table analog emitters -------------------------------------------

void write_fig3_logits(const std::string& path, const RunLogData& log,
                       const ArtifactHeader& header);
void write_fig4_correlation(const std::string& path, const CorrelationReport& report,
                            const ArtifactHeader& header);
void write_fig4_variance(const std::string& path,
                         const std::vector<std::pair<std::string, const RunLogData*>>& runs,
                         const ArtifactHeader& header);
void write_scalar_series(const std::string& path, const std::string& record_name,
                         const std::vector<std::pair<std::string, double>>& values,
                         const ArtifactHeader& header);
void write_table4_lengths(const std::string& path, const LengthScoreTable& table,
                          const ArtifactHeader& header);

}  // namespace igrl
