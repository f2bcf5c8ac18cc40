#include "prefrl/config.hpp"

#include <algorithm>
#include <fstream>

#include "prefrl/rng.hpp"

namespace prefrl {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

Config Config::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "config: cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_string(text);
}

Config Config::parse_string(const std::string& text) {
  Config cfg;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    std::string line = trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos,
            "config: line " + std::to_string(line_no) + " is not 'key = value': " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    require(!key.empty(), "config: empty key on line " + std::to_string(line_no));
    cfg.set(key, value);
  }
  return cfg;
}

void Config::set(const std::string& key, const std::string& value) { values_[key] = value; }

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    require(used == it->second.size(), "");
    return v;
  } catch (...) {
    fail("config: key '" + key + "' is not a number: " + it->second);
  }
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    const std::uint64_t v = std::stoull(it->second, &used);
    require(used == it->second.size(), "");
    return v;
  } catch (...) {
    fail("config: key '" + key + "' is not an unsigned integer: " + it->second);
  }
}

std::size_t Config::get_size(const std::string& key, std::size_t fallback) const {
  return static_cast<std::size_t>(get_u64(key, fallback));
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  fail("config: key '" + key + "' is not a boolean: " + it->second);
}

std::optional<double> Config::get_optional_double(const std::string& key,
                                                  std::optional<double> fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "none") return std::nullopt;
  return get_double(key, 0.0);
}

std::string Config::serialize() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    out += k;
    out += " = ";
    out += v;
    out += "\n";
  }
  return out;
}

std::uint64_t Config::hash() const { return fnv1a64(serialize()); }

void Config::validate_known(const std::vector<std::string>& known) const {
  for (const auto& [key, value] : values_) {
    if (std::find(known.begin(), known.end(), key) == known.end())
      fail("config: unknown key '" + key + "'");
  }
}

const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = {
      "run.seed",
      "model.vocab",
      "model.hidden",
      "model.modal_dim",
      "model.score_pool_response_only",
      "rm.lr",
      "rm.batch_size",
      "rm.max_steps",
      "rm.eval_fraction",
      "rm.eval_every",
      "rm.length_ratio_max",
      "rm.early_stop_acc",
      "ppo.gamma",
      "ppo.gae_beta",
      "ppo.clip_epsilon",
      "ppo.lr",
      "ppo.batch_size",
      "ppo.updates",
      "ppo.rollouts_per_update",
      "ppo.kl_penalty_coeff",
      "ppo.ratio_denominator",
      "ppo.reward_mode",
      "ppo.normalize_advantages",
      "ppo.epochs_per_update",
      "ppo.max_response_len",
      "decode.temperature",
      "decode.max_len",
      "decode.greedy",
      "tasks.count",
      "tasks.mix.arithmetic",
      "tasks.mix.instruction_constraint",
      "tasks.mix.modal_count",
      "tasks.mix.freeform_gold",
      "pairs.k_candidates",
      "pairs.judge",
      "pairs.gold_fallback",
      "sft.steps",
      "sft.lr",
      "sft.batch_size",
      "sft.corrupt_prob",
      "clean.threshold_kind",
      "clean.threshold_value",
      "clean.corrupt_fraction",
      "probe.padding",
      "bon.n",
      "sample.task_index",
      "paths.out_dir",
      "paths.tasks",
      "paths.pairs",
      "paths.bench",
      "paths.rm_checkpoint",
      "paths.policy_checkpoint",
      "paths.critic_checkpoint",
      "paths.policy_init",
      "paths.clean_samples",
  };
  return keys;
}

RunConfig RunConfig::from(const Config& cfg) {
  cfg.validate_known(known_config_keys());

  RunConfig rc;
  rc.seed = cfg.get_u64("run.seed", 42);
  rc.config_hash = cfg.hash();

  rc.dims.vocab = cfg.get_size("model.vocab", 24);
  rc.dims.hidden = cfg.get_size("model.hidden", 48);
  rc.dims.modal = cfg.get_size("model.modal_dim", 8);
  rc.score_opts.response_only_pooling = cfg.get_bool("model.score_pool_response_only", false);
  require(rc.dims.vocab >= tokens::kMinVocab,
          "config: model.vocab must be >= " + std::to_string(tokens::kMinVocab));

  rc.rm.lr = cfg.get_double("rm.lr", 1e-5);
  rc.rm.batch_size = cfg.get_size("rm.batch_size", 256);
  rc.rm.max_steps = cfg.get_size("rm.max_steps", 400);
  rc.rm.eval_fraction = cfg.get_double("rm.eval_fraction", 0.1);
  rc.rm.eval_every = cfg.get_size("rm.eval_every", 50);
  rc.rm.length_ratio_max = cfg.get_optional_double("rm.length_ratio_max", 2.0);
  rc.rm.early_stop_heldout_acc = cfg.get_optional_double("rm.early_stop_acc", std::nullopt);

  rc.ppo.gamma = cfg.get_double("ppo.gamma", 0.99);
  rc.ppo.gae_beta = cfg.get_double("ppo.gae_beta", 0.95);
  rc.ppo.clip_epsilon = cfg.get_double("ppo.clip_epsilon", 0.2);
  rc.ppo.lr = cfg.get_double("ppo.lr", 5e-5);
  rc.ppo.batch_size = cfg.get_size("ppo.batch_size", 256);
  rc.ppo.updates = cfg.get_size("ppo.updates", 50);
  rc.ppo.rollouts_per_update = cfg.get_size("ppo.rollouts_per_update", 16);
  rc.ppo.kl_penalty_coeff = cfg.get_double("ppo.kl_penalty_coeff", 0.0);
  const std::string denom = cfg.get_string("ppo.ratio_denominator", "rollout_snapshot");
  if (denom == "rollout_snapshot")
    rc.ppo.ratio_denominator = RatioDenominator::rollout_snapshot;
  else if (denom == "reference_model")
    rc.ppo.ratio_denominator = RatioDenominator::reference_model;
  else
    fail("config: ppo.ratio_denominator must be rollout_snapshot or reference_model");
  const std::string rmode = cfg.get_string("ppo.reward_mode", "terminal_only");
  if (rmode == "terminal_only")
    rc.ppo.reward_mode = RewardMode::terminal_only;
  else if (rmode == "per_step")
    rc.ppo.reward_mode = RewardMode::per_step;
  else
    fail("config: ppo.reward_mode must be terminal_only or per_step");
  rc.ppo.normalize_advantages = cfg.get_bool("ppo.normalize_advantages", true);
  rc.ppo.epochs_per_update = cfg.get_size("ppo.epochs_per_update", 1);
  rc.ppo.max_response_len = cfg.get_size("ppo.max_response_len", 12);
  rc.ppo.stop_token = tokens::kStop;

  rc.decode.temperature = cfg.get_double("decode.temperature", 1.0);
  rc.decode.max_len = cfg.get_size("decode.max_len", 12);
  rc.decode.greedy = cfg.get_bool("decode.greedy", false);
  rc.decode.stop_token = tokens::kStop;

  rc.task_count = cfg.get_size("tasks.count", 200);
  rc.task_mix.arithmetic = cfg.get_double("tasks.mix.arithmetic", 1.0);
  rc.task_mix.instruction_constraint = cfg.get_double("tasks.mix.instruction_constraint", 1.0);
  rc.task_mix.modal_count = cfg.get_double("tasks.mix.modal_count", 0.5);
  rc.task_mix.freeform_gold = cfg.get_double("tasks.mix.freeform_gold", 0.5);

  rc.pairs_k_candidates = cfg.get_size("pairs.k_candidates", 4);
  const std::string judge = cfg.get_string("pairs.judge", "verifier");
  if (judge == "verifier")
    rc.pairs_judge = JudgeKind::verifier;
  else if (judge == "gold_reward")
    rc.pairs_judge = JudgeKind::gold_reward;
  else
    fail("config: pairs.judge must be verifier or gold_reward");
  rc.pairs_gold_fallback = cfg.get_bool("pairs.gold_fallback", true);

  rc.sft.steps = cfg.get_size("sft.steps", 300);
  rc.sft.lr = cfg.get_double("sft.lr", 5e-3);
  rc.sft.batch_size = cfg.get_size("sft.batch_size", 16);
  rc.sft.corrupt_prob = cfg.get_double("sft.corrupt_prob", 0.5);

  const std::string tkind = cfg.get_string("clean.threshold_kind", "percentile");
  const double tvalue = cfg.get_double("clean.threshold_value", 5.0);
  if (tkind == "percentile")
    rc.clean_threshold = CleanThreshold::percentile(tvalue);
  else if (tkind == "absolute")
    rc.clean_threshold = CleanThreshold::absolute(tvalue);
  else
    fail("config: clean.threshold_kind must be percentile or absolute");

  rc.clean_corrupt_fraction = cfg.get_double("clean.corrupt_fraction", 0.05);
  rc.probe_padding = cfg.get_size("probe.padding", 8);
  rc.bon_n = cfg.get_size("bon.n", 4);
  rc.sample_task_index = cfg.get_size("sample.task_index", 0);

  rc.out_dir = cfg.get_string("paths.out_dir", "out");
  auto path_or = [&](const char* key, const std::filesystem::path& fallback) {
    const std::string v = cfg.get_string(key, "");
    return v.empty() ? fallback : std::filesystem::path(v);
  };
  rc.tasks_path = path_or("paths.tasks", rc.out_dir / "tasks.jsonl");
  rc.pairs_path = path_or("paths.pairs", rc.out_dir / "pairs.jsonl");
  rc.bench_path = path_or("paths.bench", rc.pairs_path);
  rc.rm_checkpoint = path_or("paths.rm_checkpoint", rc.out_dir / "rm.ckpt");
  rc.policy_checkpoint = path_or("paths.policy_checkpoint", rc.out_dir / "policy.ckpt");
  rc.critic_checkpoint = path_or("paths.critic_checkpoint", rc.out_dir / "critic.ckpt");
  rc.policy_init = path_or("paths.policy_init", "");
  rc.clean_samples = path_or("paths.clean_samples", rc.out_dir / "clean_samples.jsonl");
  return rc;
}

}  // namespace prefrl
