#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "prefrl/datapipe.hpp"
#include "prefrl/evalbench.hpp"
#include "prefrl/reward.hpp"
#include "prefrl/rl.hpp"
#include "prefrl/sampling.hpp"

namespace prefrl {

// JSON-lines files open with a header line {"format", "seed", "config_hash"};
// record lines carry the documented schema. Readers accept files without the
// header. JSON documents carry the same three fields at top level.
struct FileMeta {
  std::string format;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
};

void write_tasks(const std::filesystem::path& path, const std::vector<SyntheticTask>& tasks,
                 const FileMeta& meta);
std::vector<SyntheticTask> read_tasks(const std::filesystem::path& path);

// Pair lines: {id, prompt_tokens, modal?, chosen_tokens, rejected_tokens,
// domain_tag, source_tag, category}. The category (= domain tag unless given)
// makes every pairs file loadable as a benchmark.
void write_pairs(const std::filesystem::path& path, const std::vector<PreferencePair>& pairs,
                 const FileMeta& meta);
std::vector<PreferencePair> read_pairs(const std::filesystem::path& path);
BenchmarkSet read_benchmark(const std::filesystem::path& path);

void write_clean_samples(const std::filesystem::path& path,
                         const std::vector<CleanSample>& samples, const FileMeta& meta);
std::vector<CleanSample> read_clean_samples(const std::filesystem::path& path);

void write_rm_log(const std::filesystem::path& path, const std::vector<RMTrainLogEntry>& log,
                  const FileMeta& meta);
void write_ppo_log(const std::filesystem::path& path, const std::vector<PPOLogEntry>& log,
                   const FileMeta& meta);
std::vector<PPOLogEntry> read_ppo_log(const std::filesystem::path& path);

void write_clean_report(const std::filesystem::path& path, const CleaningReport& report,
                        const FileMeta& meta);
void write_bench_report(const std::filesystem::path& json_path,
                        const std::filesystem::path& table_path, const BenchReport& report,
                        const FileMeta& meta);
void write_probe_report(const std::filesystem::path& path, const LengthBiasReport& report,
                        const FileMeta& meta);
void write_bon_audit(const std::filesystem::path& path, const std::vector<Token>& prompt,
                     const BestOfNResult& result, const FileMeta& meta);
void write_sample_output(const std::filesystem::path& path, const std::vector<Token>& prompt,
                         const std::vector<Token>& response, std::uint64_t gen_seed,
                         const FileMeta& meta);

}  // namespace prefrl
