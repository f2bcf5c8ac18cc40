#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "prefrl/datapipe.hpp"
#include "prefrl/reward.hpp"
#include "prefrl/rl.hpp"

namespace prefrl {

// Flat "section.key = value" configuration. Raw strings round-trip exactly;
// typed accessors parse on demand. Unknown keys are rejected when a run
// config is assembled.
class Config {
 public:
  static Config parse_file(const std::filesystem::path& path);
  static Config parse_string(const std::string& text);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // "none" (or absence) maps to nullopt
  std::optional<double> get_optional_double(const std::string& key,
                                            std::optional<double> fallback) const;

  // Canonical form: keys sorted, one "key = value" per line.
  std::string serialize() const;
  std::uint64_t hash() const;

  void validate_known(const std::vector<std::string>& known) const;

 private:
  std::map<std::string, std::string> values_;
};

// Typed view of everything the pipeline needs. Carries the paper-derived
// defaults; any key can be overridden by file or --set.
struct RunConfig {
  std::uint64_t seed = 42;

  ModelDims dims;
  ScoreOptions score_opts;

  RMTrainConfig rm;
  PPOConfig ppo;
  DecodeConfig decode;

  std::size_t task_count = 200;
  TaskMix task_mix;

  std::size_t pairs_k_candidates = 4;
  JudgeKind pairs_judge = JudgeKind::verifier;
  bool pairs_gold_fallback = true;

  SftConfig sft;

  CleanThreshold clean_threshold = CleanThreshold::percentile(5.0);
  double clean_corrupt_fraction = 0.05;
  std::size_t probe_padding = 8;
  std::size_t bon_n = 4;
  std::size_t sample_task_index = 0;

  std::filesystem::path out_dir = "out";
  std::filesystem::path tasks_path;        // default <out>/tasks.jsonl
  std::filesystem::path pairs_path;        // default <out>/pairs.jsonl
  std::filesystem::path bench_path;        // default = pairs_path
  std::filesystem::path rm_checkpoint;     // default <out>/rm.ckpt
  std::filesystem::path policy_checkpoint; // default <out>/policy.ckpt
  std::filesystem::path critic_checkpoint; // default <out>/critic.ckpt
  std::filesystem::path policy_init;       // optional: start PPO/pair building from this
  std::filesystem::path clean_samples;     // default <out>/clean_samples.jsonl

  std::uint64_t config_hash = 0;

  static RunConfig from(const Config& cfg);
};

const std::vector<std::string>& known_config_keys();

}  // namespace prefrl
