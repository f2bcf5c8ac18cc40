#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "prefrl/checkpoint.hpp"
#include "prefrl/config.hpp"
#include "prefrl/io.hpp"

namespace {

using namespace prefrl;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string seed;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "configuration file (section.key = value)");
  cmd->add_option("--set", args.overrides, "override a config key, e.g. --set rm.lr=1e-4")
      ->take_all();
  cmd->add_option("--seed", args.seed, "run seed (overrides run.seed)");
  cmd->add_option("--out", args.out_dir, "output directory (overrides paths.out_dir)");
}

RunConfig load_run_config(const CommonArgs& args) {
  Config cfg;
  if (!args.config_path.empty()) cfg = Config::parse_file(args.config_path);
  for (const std::string& kv : args.overrides) {
    const auto eq = kv.find('=');
    require(eq != std::string::npos, "--set expects key=value, got: " + kv);
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!args.seed.empty()) cfg.set("run.seed", args.seed);
  if (!args.out_dir.empty()) cfg.set("paths.out_dir", args.out_dir);
  return RunConfig::from(cfg);
}

FileMeta meta_for(const RunConfig& rc, const std::string& format) {
  return FileMeta{format, rc.seed, rc.config_hash};
}

CheckpointMeta ckpt_meta(const RunConfig& rc) { return CheckpointMeta{1, rc.seed, rc.config_hash}; }

// Exclusive lock on a checkpoint directory; removed on scope exit.
class DirLock {
 public:
  explicit DirLock(const std::filesystem::path& dir) : path_(dir / ".prefrl.lock") {
    std::filesystem::create_directories(dir);
    std::FILE* f = std::fopen(path_.string().c_str(), "wx");
    require(f != nullptr, "lock: another run holds " + path_.string());
    std::fclose(f);
  }
  ~DirLock() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  std::filesystem::path path_;
};

ModelParams policy_init_for(const RunConfig& rc, const std::vector<SyntheticTask>& tasks) {
  if (!rc.policy_init.empty()) return load_checkpoint(rc.policy_init);
  ModelParams base = init_model_params(rc.dims, derive_seed(rc.seed, "policy/init"));
  return sft_pretrain(base, tasks, rc.sft, rc.seed);
}

std::string tokens_str(const std::vector<Token>& tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s += " ";
    s += std::to_string(tokens[i]);
  }
  return s;
}

int run_gen_tasks(const CommonArgs& args) {
  const RunConfig rc = load_run_config(args);
  const std::vector<SyntheticTask> tasks =
      gen_tasks(rc.task_count, rc.task_mix, rc.dims.modal, rc.seed);
  write_tasks(rc.tasks_path, tasks, meta_for(rc, "tasks.v1"));
  // companion corpus for clean-data: gold answers with a known corrupt share
  const CorruptCorpus corpus = make_clean_corpus(tasks, rc.clean_corrupt_fraction, rc.seed);
  write_clean_samples(rc.clean_samples, corpus.samples, meta_for(rc, "clean-samples.v1"));
  std::cout << "gen-tasks: wrote " << tasks.size() << " tasks to " << rc.tasks_path.string()
            << " and " << corpus.samples.size() << " cleaning samples ("
            << corpus.corrupt_ids.size() << " corrupted) to " << rc.clean_samples.string()
            << "\n";
  return 0;
}

int run_build_prefs(const CommonArgs& args) {
  const RunConfig rc = load_run_config(args);
  const std::vector<SyntheticTask> tasks = read_tasks(rc.tasks_path);
  const ModelParams policy = policy_init_for(rc, tasks);
  const BuildPairsResult result =
      build_pairs(policy, tasks, rc.pairs_k_candidates, rc.pairs_judge, rc.decode, rc.seed,
                  rc.pairs_gold_fallback);
  write_pairs(rc.pairs_path, result.pairs, meta_for(rc, "pref-pairs.v1"));
  std::cout << "build-prefs: wrote " << result.pairs.size() << " pairs (" << result.skipped
            << " tasks skipped) to " << rc.pairs_path.string() << "\n";
  return 0;
}

int run_train_rm(const CommonArgs& args) {
  const RunConfig rc = load_run_config(args);
  const std::vector<PreferencePair> pairs = read_pairs(rc.pairs_path);
  const ModelParams init = init_model_params(rc.dims, derive_seed(rc.seed, "rm/init"));
  const RMTrainResult result = train_reward_model(init, pairs, rc.rm, rc.seed, rc.score_opts);

  DirLock lock(rc.rm_checkpoint.parent_path().empty() ? "." : rc.rm_checkpoint.parent_path());
  save_checkpoint(rc.rm_checkpoint, result.params, ckpt_meta(rc));
  write_rm_log(rc.out_dir / "rm_train_log.jsonl", result.log, meta_for(rc, "rm-log.v1"));
  std::cout << "train-rm: " << result.train_pairs << " train / " << result.heldout_pairs
            << " held-out pairs (" << result.pairs_filtered_out
            << " removed by length filter), final held-out acc " << result.final_heldout_acc
            << ", checkpoint " << rc.rm_checkpoint.string() << "\n";
  return 0;
}

int run_eval_rm(const CommonArgs& args) {
  const RunConfig rc = load_run_config(args);
  const ModelParams rm = load_checkpoint(rc.rm_checkpoint);
  const BenchmarkSet bench = read_benchmark(rc.bench_path);
  const BenchReport report = evaluate_rm(rm, bench, rc.score_opts);
  write_bench_report(rc.out_dir / "bench_report.json", rc.out_dir / "bench_report.txt", report,
                     meta_for(rc, "bench-report.v1"));
  std::cout << "eval-rm: overall_acc " << report.overall_acc << ", macro_acc " << report.macro_acc
            << " over " << report.total_pairs << " pairs in " << report.categories.size()
            << " categories\n";
  return 0;
}

int run_train_ppo(const CommonArgs& args) {
  const RunConfig rc = load_run_config(args);
  const ModelParams rm = load_checkpoint(rc.rm_checkpoint);
  const std::vector<SyntheticTask> tasks = read_tasks(rc.tasks_path);
  const ModelParams policy_init = policy_init_for(rc, tasks);
  const std::vector<PromptCase> prompts = to_prompt_cases(tasks, rc.dims.vocab);

  const PPOResult result =
      ppo_train(policy_init, rm, policy_init, prompts, rc.ppo, rc.seed, rc.score_opts);

  DirLock lock(rc.policy_checkpoint.parent_path().empty() ? "."
                                                          : rc.policy_checkpoint.parent_path());
  save_checkpoint(rc.policy_checkpoint, result.policy, ckpt_meta(rc));
  save_checkpoint(rc.critic_checkpoint, result.critic, ckpt_meta(rc));
  write_ppo_log(rc.out_dir / "ppo_log.jsonl", result.log, meta_for(rc, "ppo-log.v1"));

  std::string gold = "n/a";
  if (!result.log.empty() && result.log.back().mean_reward_gold)
    gold = std::to_string(*result.log.back().mean_reward_gold);
  std::cout << "train-ppo: " << rc.ppo.updates << " updates, final mean_reward_rm "
            << (result.log.empty() ? 0.0 : result.log.back().mean_reward_rm)
            << ", final mean_reward_gold " << gold << ", checkpoint "
            << rc.policy_checkpoint.string() << "\n";
  return 0;
}

const SyntheticTask& task_at(const std::vector<SyntheticTask>& tasks, std::size_t index) {
  require(index < tasks.size(), "sample: task index " + std::to_string(index) +
                                    " out of range (have " + std::to_string(tasks.size()) + ")");
  return tasks[index];
}

int run_sample(const CommonArgs& args) {
  const RunConfig rc = load_run_config(args);
  const ModelParams policy = load_checkpoint(rc.policy_checkpoint);
  const std::vector<SyntheticTask> tasks = read_tasks(rc.tasks_path);
  const SyntheticTask& task = task_at(tasks, rc.sample_task_index);
  const std::vector<Token> response = generate(policy, task.prompt, task.modal, rc.decode, rc.seed);
  write_sample_output(rc.out_dir / "sample.json", task.prompt, response, rc.seed,
                      meta_for(rc, "sample.v1"));
  std::cout << "sample: prompt [" << tokens_str(task.prompt) << "] -> response ["
            << tokens_str(response) << "]\n";
  return 0;
}

int run_bon(const CommonArgs& args, std::size_t n_override) {
  RunConfig rc = load_run_config(args);
  if (n_override > 0) rc.bon_n = n_override;
  const ModelParams policy = load_checkpoint(rc.policy_checkpoint);
  const ModelParams rm = load_checkpoint(rc.rm_checkpoint);
  const std::vector<SyntheticTask> tasks = read_tasks(rc.tasks_path);
  const SyntheticTask& task = task_at(tasks, rc.sample_task_index);
  const BestOfNResult result = best_of_n(policy, rm, task.prompt, task.modal, rc.bon_n, rc.decode,
                                         rc.seed, rc.score_opts);
  write_bon_audit(rc.out_dir / "bon.json", task.prompt, result, meta_for(rc, "bon.v1"));
  std::cout << "bon: n=" << rc.bon_n << ", winner index " << result.winner_index << " score "
            << result.winner().rm_score << " -> [" << tokens_str(result.winner().tokens) << "]\n";
  return 0;
}

int run_clean_data(const CommonArgs& args) {
  const RunConfig rc = load_run_config(args);
  const ModelParams rm = load_checkpoint(rc.rm_checkpoint);
  const std::vector<CleanSample> samples = read_clean_samples(rc.clean_samples);
  const CleaningReport report = clean_dataset(rm, samples, rc.clean_threshold, rc.score_opts);
  write_clean_report(rc.out_dir / "clean_report.json", report, meta_for(rc, "clean-report.v1"));
  std::cout << "clean-data: flagged " << report.flagged_ids.size() << " of " << samples.size()
            << " samples (threshold " << report.threshold_used << ")\n";
  return 0;
}

int run_probe_length(const CommonArgs& args) {
  const RunConfig rc = load_run_config(args);
  const ModelParams rm = load_checkpoint(rc.rm_checkpoint);
  const std::vector<PreferencePair> pairs = read_pairs(rc.pairs_path);
  const LengthBiasReport report =
      length_bias_probe(rm, pairs, rc.probe_padding, tokens::kFiller, rc.score_opts);
  write_probe_report(rc.out_dir / "probe_report.json", report, meta_for(rc, "probe-report.v1"));
  std::cout << "probe-length: padding " << report.padding << ", mean_delta " << report.mean_delta
            << ", flip_fraction " << report.flip_fraction << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"preference-optimization toolkit: reward modeling, PPO, best-of-N"};
  app.require_subcommand(1);

  struct Sub {
    CLI::App* cmd;
    CommonArgs args;
  };
  std::map<std::string, Sub> subs;
  for (const char* name : {"gen-tasks", "build-prefs", "train-rm", "eval-rm", "train-ppo",
                           "sample", "bon", "clean-data", "probe-length"}) {
    Sub& sub = subs[name];
    sub.cmd = app.add_subcommand(name, "");
    add_common(sub.cmd, sub.args);
  }
  subs["gen-tasks"].cmd->description("generate synthetic tasks");
  subs["build-prefs"].cmd->description("sample candidates and build preference pairs");
  subs["train-rm"].cmd->description("train the reward model on preference pairs");
  subs["eval-rm"].cmd->description("evaluate a reward model on a benchmark file");
  subs["train-ppo"].cmd->description("PPO policy optimization against the reward model");
  subs["sample"].cmd->description("draw one response from the policy");
  subs["bon"].cmd->description("best-of-N sampling reranked by the reward model");
  subs["clean-data"].cmd->description("flag low-scoring samples in a corpus");
  subs["probe-length"].cmd->description("measure length bias of a reward model");

  std::size_t bon_n = 0;
  subs["bon"].cmd->add_option("--n", bon_n, "number of candidates (overrides bon.n)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (subs["gen-tasks"].cmd->parsed()) return run_gen_tasks(subs["gen-tasks"].args);
    if (subs["build-prefs"].cmd->parsed()) return run_build_prefs(subs["build-prefs"].args);
    if (subs["train-rm"].cmd->parsed()) return run_train_rm(subs["train-rm"].args);
    if (subs["eval-rm"].cmd->parsed()) return run_eval_rm(subs["eval-rm"].args);
    if (subs["train-ppo"].cmd->parsed()) return run_train_ppo(subs["train-ppo"].args);
    if (subs["sample"].cmd->parsed()) return run_sample(subs["sample"].args);
    if (subs["bon"].cmd->parsed()) return run_bon(subs["bon"].args, bon_n);
    if (subs["clean-data"].cmd->parsed()) return run_clean_data(subs["clean-data"].args);
    if (subs["probe-length"].cmd->parsed()) return run_probe_length(subs["probe-length"].args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand\n";
  return 1;
}
