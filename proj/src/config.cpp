#include "igrl/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "igrl/rng.hpp"

namespace igrl {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) {
    return "";
  }
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const double d = std::stod(value, &used);
    if (used != value.size()) {
      throw std::invalid_argument("");
    }
    return d;
  } catch (...) {
    throw std::invalid_argument("config key '" + key + "': expected a number, got '" + value +
                                "'");
  }
}

long long parse_int(const std::string& key, const std::string& value) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw std::invalid_argument("config key '" + key + "': expected an integer, got '" + value +
                                "'");
  }
  return v;
}

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

PolicyConfig RunConfig::policy_config(int vocab_size) const {
  PolicyConfig cfg;
  cfg.vocab_size = vocab_size;
  cfg.d_model = policy.d_model;
  cfg.n_layers = policy.n_layers;
  cfg.n_heads = policy.n_heads;
  cfg.max_seq = policy.max_seq;
  cfg.init_std = policy.init_std;
  return cfg;
}

SamplerConfig RunConfig::sampler_config(uint64_t sample_seed) const {
  SamplerConfig cfg;
  cfg.temperature = sampler.temperature;
  cfg.top_p = sampler.top_p;
  cfg.max_new_tokens = sampler.max_new_tokens;
  cfg.seed = sample_seed;
  return cfg;
}

SftConfig RunConfig::sft_config() const {
  SftConfig cfg;
  cfg.learning_rate = sft.learning_rate;
  cfg.batch_size = sft.batch_size;
  cfg.epochs = sft.epochs;
  cfg.schedule = sft.schedule;
  cfg.warmup_ratio = sft.warmup_ratio;
  cfg.momentum = sft.momentum;
  cfg.seed = Rng::mix(seed, 0x5f74);
  return cfg;
}

GrpoConfig RunConfig::grpo_config() const {
  GrpoConfig cfg;
  cfg.group_size = grpo.group_size;
  cfg.kl_beta = grpo.kl_beta;
  cfg.advantage_epsilon = grpo.advantage_epsilon;
  cfg.learning_rate = grpo.learning_rate;
  cfg.steps = grpo.steps;
  cfg.grad_clip_norm = grpo.grad_clip_norm;
  cfg.checkpoint_every = grpo.checkpoint_every;
  cfg.mode = rewards.mode;
  cfg.seed = Rng::mix(seed, 0x6770);
  return cfg;
}

InfoGainConfig RunConfig::info_config() const {
  InfoGainConfig cfg;
  cfg.temperature = rewards.info_temperature;
  cfg.mode = rewards.mode;
  return cfg;
}

DistanceRewardConfig RunConfig::distance_config() const {
  DistanceRewardConfig cfg;
  cfg.c = rewards.distance_c;
  return cfg;
}

std::map<std::string, std::string> RunConfig::to_kv() const {
  std::map<std::string, std::string> kv;
  kv["seed"] = std::to_string(seed);
  for (const auto& [kind, n] : corpus.train_counts) {
    kv[std::string("corpus.train.") + kind_name(kind)] = std::to_string(n);
  }
  for (const auto& [kind, n] : corpus.eval_counts) {
    kv[std::string("corpus.eval.") + kind_name(kind)] = std::to_string(n);
  }
  kv["corpus.sft_traces"] = std::to_string(corpus.sft_traces);
  kv["policy.d_model"] = std::to_string(policy.d_model);
  kv["policy.n_layers"] = std::to_string(policy.n_layers);
  kv["policy.n_heads"] = std::to_string(policy.n_heads);
  kv["policy.max_seq"] = std::to_string(policy.max_seq);
  kv["policy.init_std"] = format_double(policy.init_std);
  kv["sampler.temperature"] = format_double(sampler.temperature);
  kv["sampler.top_p"] = format_double(sampler.top_p);
  kv["sampler.max_new_tokens"] = std::to_string(sampler.max_new_tokens);
  kv["sft.learning_rate"] = format_double(sft.learning_rate);
  kv["sft.batch_size"] = std::to_string(sft.batch_size);
  kv["sft.epochs"] = std::to_string(sft.epochs);
  kv["sft.lr_schedule"] = sft.schedule == LrSchedule::CosineWarmup ? "cosine_warmup" : "constant";
  kv["sft.warmup_ratio"] = format_double(sft.warmup_ratio);
  kv["sft.momentum"] = format_double(sft.momentum);
  kv["grpo.group_size"] = std::to_string(grpo.group_size);
  kv["grpo.kl_beta"] = format_double(grpo.kl_beta);
  kv["grpo.advantage_epsilon"] = format_double(grpo.advantage_epsilon);
  kv["grpo.learning_rate"] = format_double(grpo.learning_rate);
  kv["grpo.steps"] = std::to_string(grpo.steps);
  kv["grpo.grad_clip_norm"] = format_double(grpo.grad_clip_norm);
  kv["grpo.checkpoint_every"] = std::to_string(grpo.checkpoint_every);
  kv["rewards.info_temperature"] = format_double(rewards.info_temperature);
  kv["rewards.distance_c"] = format_double(rewards.distance_c);
  kv["rewards.mode"] = reward_mode_name(rewards.mode);
  kv["telemetry.numeric_band"] = format_double(telemetry.numeric_band);
  kv["paths.corpus_dir"] = paths.corpus_dir;
  return kv;
}

uint64_t RunConfig::config_hash() const {
  uint64_t h = 0xcbf29ce484222325ull;
  auto feed = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
  };
  for (const auto& [k, v] : to_kv()) {
    feed(k);
    feed("=");
    feed(v);
    feed("\n");
  }
  return h;
}

void RunConfig::validate() const {
  for (const auto& [kind, n] : corpus.train_counts) {
    if (n < 0) throw std::invalid_argument("corpus.train counts must be non-negative");
  }
  for (const auto& [kind, n] : corpus.eval_counts) {
    if (n < 0) throw std::invalid_argument("corpus.eval counts must be non-negative");
  }
  if (corpus.sft_traces < 0) throw std::invalid_argument("corpus.sft_traces must be non-negative");
  policy_config(1).validate();
  sampler_config(0).validate();
  sft_config().validate();
  grpo_config().validate();
  info_config().validate();
  distance_config().validate();
  if (telemetry.numeric_band < 0.0) {
    throw std::invalid_argument("telemetry.numeric_band must be non-negative");
  }
  if (paths.corpus_dir.empty()) {
    throw std::invalid_argument("paths.corpus_dir must be non-empty");
  }
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;

  using Setter = std::function<void(const std::string&, const std::string&)>;
  std::map<std::string, Setter> schema;

  auto int_key = [&schema](const std::string& key, int* dst) {
    schema[key] = [key, dst](const std::string& k, const std::string& v) {
      const long long n = parse_int(k, v);
      *dst = static_cast<int>(n);
    };
  };
  auto double_key = [&schema](const std::string& key, double* dst) {
    schema[key] = [key, dst](const std::string& k, const std::string& v) {
      *dst = parse_double(k, v);
    };
  };

  schema["seed"] = [&cfg](const std::string& k, const std::string& v) {
    cfg.seed = static_cast<uint64_t>(parse_int(k, v));
  };
  for (TaskKind kind : {TaskKind::MultiLabel, TaskKind::NumericDistance,
                        TaskKind::MultipleChoice, TaskKind::NumericExact}) {
    int_key(std::string("corpus.train.") + kind_name(kind), &cfg.corpus.train_counts[kind]);
    int_key(std::string("corpus.eval.") + kind_name(kind), &cfg.corpus.eval_counts[kind]);
  }
  int_key("corpus.sft_traces", &cfg.corpus.sft_traces);
  int_key("policy.d_model", &cfg.policy.d_model);
  int_key("policy.n_layers", &cfg.policy.n_layers);
  int_key("policy.n_heads", &cfg.policy.n_heads);
  int_key("policy.max_seq", &cfg.policy.max_seq);
  double_key("policy.init_std", &cfg.policy.init_std);
  double_key("sampler.temperature", &cfg.sampler.temperature);
  double_key("sampler.top_p", &cfg.sampler.top_p);
  int_key("sampler.max_new_tokens", &cfg.sampler.max_new_tokens);
  double_key("sft.learning_rate", &cfg.sft.learning_rate);
  int_key("sft.batch_size", &cfg.sft.batch_size);
  int_key("sft.epochs", &cfg.sft.epochs);
  schema["sft.lr_schedule"] = [&cfg](const std::string& k, const std::string& v) {
    if (v == "cosine_warmup") {
      cfg.sft.schedule = LrSchedule::CosineWarmup;
    } else if (v == "constant") {
      cfg.sft.schedule = LrSchedule::Constant;
    } else {
      throw std::invalid_argument("config key '" + k +
                                  "': expected constant|cosine_warmup, got '" + v + "'");
    }
  };
  double_key("sft.warmup_ratio", &cfg.sft.warmup_ratio);
  double_key("sft.momentum", &cfg.sft.momentum);
  int_key("grpo.group_size", &cfg.grpo.group_size);
  double_key("grpo.kl_beta", &cfg.grpo.kl_beta);
  double_key("grpo.advantage_epsilon", &cfg.grpo.advantage_epsilon);
  double_key("grpo.learning_rate", &cfg.grpo.learning_rate);
  int_key("grpo.steps", &cfg.grpo.steps);
  double_key("grpo.grad_clip_norm", &cfg.grpo.grad_clip_norm);
  int_key("grpo.checkpoint_every", &cfg.grpo.checkpoint_every);
  double_key("rewards.info_temperature", &cfg.rewards.info_temperature);
  double_key("rewards.distance_c", &cfg.rewards.distance_c);
  schema["rewards.mode"] = [&cfg](const std::string& k, const std::string& v) {
    const auto mode = parse_reward_mode(v);
    if (!mode.has_value()) {
      throw std::invalid_argument("config key '" + k + "': expected info_gain|legal_only, got '" +
                                  v + "'");
    }
    cfg.rewards.mode = *mode;
  };
  double_key("telemetry.numeric_band", &cfg.telemetry.numeric_band);
  schema["paths.corpus_dir"] = [&cfg](const std::string&, const std::string& v) {
    cfg.paths.corpus_dir = v;
  };

  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = schema.find(key);
    if (it == schema.end()) {
      throw std::invalid_argument("unknown config key '" + key + "'");
    }
    it->second(key, value);
  }

  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open config file: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string hash_hex(uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

}  // namespace igrl
