#include "prefrl/rl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "prefrl/optim.hpp"
#include "prefrl/parallel.hpp"
#include "prefrl/rng.hpp"

namespace prefrl {

void validate_trajectory(const Trajectory& traj, bool rewards_required) {
  const std::size_t t = traj.actions.size();
  require(t >= 1, "trajectory: length must be >= 1");
  require(traj.sample.response == traj.actions,
          "trajectory: actions must equal the sample's response tokens");
  require(traj.logprobs_old.size() == t && traj.values.size() == t,
          "trajectory: per-step lists must share one length");
  if (rewards_required)
    require(traj.rewards.size() == t, "trajectory: rewards not assigned");
  for (double lp : traj.logprobs_old)
    require(lp <= 0.0, "trajectory: log-probabilities must be <= 0");
}

Trajectory assign_rewards(const ModelParams& rm, Trajectory traj, RewardMode mode,
                          const ScoreOptions& opts, double kl_penalty_coeff,
                          const ModelParams* reference) {
  require(!traj.sample.response.empty(), "assign_rewards: empty response");
  const std::size_t t_len = traj.sample.response.size();

  traj.rewards.assign(t_len, 0.0);
  if (mode == RewardMode::terminal_only) {
    traj.rewards[t_len - 1] = reward_score(rm, traj.sample, opts);
  } else {
    Tape tape(false);
    ModelGraph graph(tape, rm);
    const std::vector<Var> scores = graph.truncated_scores(traj.sample, opts);
    for (std::size_t i = 0; i < t_len; ++i) traj.rewards[i] = tape.value(scores[i]).value();
  }

  if (kl_penalty_coeff > 0.0) {
    require(reference != nullptr, "assign_rewards: kl penalty needs a reference model");
    const std::vector<double> ref_lp = policy_logprobs(*reference, traj.sample);
    require(ref_lp.size() == t_len, "assign_rewards: reference log-prob length mismatch");
    for (std::size_t i = 0; i < t_len; ++i)
      traj.rewards[i] -= kl_penalty_coeff * (traj.logprobs_old[i] - ref_lp[i]);
  }
  return traj;
}

AdvantageTable gae(const Trajectory& traj, double gamma, double beta) {
  validate_trajectory(traj, true);
  const std::size_t t_len = traj.rewards.size();

  AdvantageTable table;
  table.delta.resize(t_len);
  table.advantage.resize(t_len);
  table.ret.resize(t_len);

  for (std::size_t t = 0; t < t_len; ++t) {
    const double v_next = t + 1 < t_len ? traj.values[t + 1] : 0.0;  // terminal bootstrap 0
    table.delta[t] = traj.rewards[t] + gamma * v_next - traj.values[t];
  }
  double a_next = 0.0;
  for (std::size_t t = t_len; t-- > 0;) {
    table.advantage[t] = table.delta[t] + gamma * beta * a_next;
    a_next = table.advantage[t];
  }
  for (std::size_t t = 0; t < t_len; ++t) table.ret[t] = table.advantage[t] + traj.values[t];
  return table;
}

Var ppo_policy_loss_var(Tape& tape, Var new_logprobs, const std::vector<double>& old_logprobs,
                        const std::vector<double>& advantages, double epsilon) {
  require(epsilon > 0.0, "ppo_policy_loss: epsilon must be positive");
  const std::size_t t_len = tape.value(new_logprobs).numel();
  require(old_logprobs.size() == t_len && advantages.size() == t_len,
          "ppo_policy_loss: per-step lists must share one length");

  Var old_lp = tape.constant(Tensor::vec(old_logprobs));
  Var adv = tape.constant(Tensor::vec(advantages));
  Var ratio = tape.exp(tape.sub(new_logprobs, old_lp));
  Var unclipped = tape.mul(ratio, adv);
  Var clipped = tape.mul(tape.clip(ratio, 1.0 - epsilon, 1.0 + epsilon), adv);
  Var objective = tape.minimum(unclipped, clipped);
  return tape.scale(tape.mean(objective), -1.0);
}

double ppo_policy_loss(const std::vector<double>& new_logprobs,
                       const std::vector<double>& old_logprobs,
                       const std::vector<double>& advantages, double epsilon) {
  Tape tape(false);
  Var loss = ppo_policy_loss_var(tape, tape.constant(Tensor::vec(new_logprobs)), old_logprobs,
                                 advantages, epsilon);
  return tape.value(loss).value();
}

Var critic_loss_var(Tape& tape, Var values, const std::vector<double>& returns) {
  const std::size_t t_len = tape.value(values).numel();
  require(returns.size() == t_len, "critic_loss: values/returns length mismatch");
  Var diff = tape.sub(values, tape.constant(Tensor::vec(returns)));
  return tape.sum(tape.mul(diff, diff));
}

double critic_loss(const std::vector<double>& values, const std::vector<double>& returns) {
  Tape tape(false);
  Var loss = critic_loss_var(tape, tape.constant(Tensor::vec(values)), returns);
  return tape.value(loss).value();
}

namespace {

struct RolloutRecord {
  Trajectory traj;
  std::vector<double> ref_logprobs;
  double rm_score = 0.0;
  double gold = 0.0;
  bool has_gold = false;
};

}  // namespace

PPOResult ppo_train(const ModelParams& policy_init, const ModelParams& rm,
                    const ModelParams& reference, const std::vector<PromptCase>& prompts,
                    const PPOConfig& cfg, std::uint64_t seed, const ScoreOptions& rm_opts) {
  require(!prompts.empty(), "ppo_train: empty prompt set");
  require(cfg.rollouts_per_update >= 1, "ppo_train: rollouts_per_update must be >= 1");
  require(cfg.gamma > 0.0 && cfg.gamma <= 1.0, "ppo_train: gamma must be in (0, 1]");
  require(cfg.gae_beta >= 0.0 && cfg.gae_beta <= 1.0, "ppo_train: beta must be in [0, 1]");
  require(cfg.clip_epsilon > 0.0, "ppo_train: clip_epsilon must be positive");
  require(model_dims(policy_init).vocab == model_dims(rm).vocab,
          "ppo_train: reward model and policy vocabulary sizes differ");
  require(model_dims(policy_init).vocab == model_dims(reference).vocab,
          "ppo_train: reference model and policy vocabulary sizes differ");

  PPOResult result;
  result.policy = policy_init;
  result.critic = make_critic_init(rm);

  AdamState policy_adam;
  AdamState critic_adam;

  DecodeConfig decode;
  decode.temperature = 1.0;
  decode.max_len = cfg.max_response_len;
  decode.stop_token = cfg.stop_token;

  // Prompts are drawn round-robin from a reshuffled permutation so update
  // batches have even task composition; i.i.d. draws would add composition
  // noise to every logged mean.
  Rng shuffle_rng = make_stream(seed, "ppo/prompt-order");
  std::vector<std::size_t> order(prompts.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle_rng.shuffle(order);
  std::size_t cursor = 0;

  for (std::size_t update = 1; update <= cfg.updates; ++update) {
    // -- rollouts --
    std::vector<std::size_t> picks(cfg.rollouts_per_update);
    for (auto& p : picks) {
      if (cursor == order.size()) {
        shuffle_rng.shuffle(order);
        cursor = 0;
      }
      p = order[cursor++];
    }

    std::vector<RolloutRecord> records(cfg.rollouts_per_update);
    parallel_for(cfg.rollouts_per_update, [&](std::size_t i) {
      const PromptCase& pc = prompts[picks[i]];
      const std::uint64_t rollout_seed =
          derive_seed(seed, "ppo/rollout/" + std::to_string(update) + "/" + std::to_string(i));
      GenerationResult gen =
          generate_with_logprobs(result.policy, pc.prompt, pc.modal, decode, rollout_seed);

      RolloutRecord rec;
      rec.traj.sample = SequenceSample{pc.prompt, gen.tokens, pc.modal};
      rec.traj.actions = gen.tokens;
      rec.traj.logprobs_old = gen.logprobs;
      rec.traj.values = value_estimates(result.critic, rec.traj.sample);
      rec.ref_logprobs = policy_logprobs(reference, rec.traj.sample);
      rec.rm_score = reward_score(rm, rec.traj.sample, rm_opts);
      rec.traj = assign_rewards(rm, std::move(rec.traj), cfg.reward_mode, rm_opts,
                                cfg.kl_penalty_coeff, &reference);
      if (pc.gold_reward) {
        rec.gold = pc.gold_reward(gen.tokens);
        rec.has_gold = true;
      }
      records[i] = std::move(rec);
    });

    // -- advantages --
    std::vector<AdvantageTable> tables(records.size());
    for (std::size_t i = 0; i < records.size(); ++i)
      tables[i] = gae(records[i].traj, cfg.gamma, cfg.gae_beta);

    if (cfg.normalize_advantages) {
      double mean = 0.0;
      std::size_t n = 0;
      for (const auto& t : tables)
        for (double a : t.advantage) {
          mean += a;
          ++n;
        }
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (const auto& t : tables)
        for (double a : t.advantage) var += (a - mean) * (a - mean);
      const double sd = std::sqrt(var / static_cast<double>(n));
      for (auto& t : tables)
        for (double& a : t.advantage) a = (a - mean) / (sd + 1e-8);
    }

    // -- optimizer steps --
    double policy_loss_acc = 0.0;
    double critic_loss_acc = 0.0;
    std::size_t loss_chunks = 0;
    const std::size_t chunk = std::max<std::size_t>(1, std::min(cfg.batch_size, records.size()));
    for (std::size_t epoch = 0; epoch < cfg.epochs_per_update; ++epoch) {
      for (std::size_t start = 0; start < records.size(); start += chunk) {
        const std::size_t end = std::min(records.size(), start + chunk);

        // policy
        {
          Tape tape;
          ModelGraph graph(tape, result.policy);
          std::vector<Var> new_lps;
          std::vector<double> old_flat, adv_flat;
          for (std::size_t i = start; i < end; ++i) {
            new_lps.push_back(graph.response_logprobs(records[i].traj.sample));
            const std::vector<double>& denom =
                cfg.ratio_denominator == RatioDenominator::rollout_snapshot
                    ? records[i].traj.logprobs_old
                    : records[i].ref_logprobs;
            old_flat.insert(old_flat.end(), denom.begin(), denom.end());
            adv_flat.insert(adv_flat.end(), tables[i].advantage.begin(),
                            tables[i].advantage.end());
          }
          Var loss = ppo_policy_loss_var(tape, tape.concat(new_lps), old_flat, adv_flat,
                                         cfg.clip_epsilon);
          policy_loss_acc += tape.value(loss).value();
          GradMap grads = tape.backward(loss);
          if (cfg.lr != 0.0) policy_adam.step(result.policy, grads, cfg.lr);
        }

        // critic
        {
          Tape tape;
          ModelGraph graph(tape, result.critic);
          std::vector<Var> values;
          std::vector<double> ret_flat;
          for (std::size_t i = start; i < end; ++i) {
            values.push_back(graph.response_values(records[i].traj.sample));
            ret_flat.insert(ret_flat.end(), tables[i].ret.begin(), tables[i].ret.end());
          }
          Var loss = critic_loss_var(tape, tape.concat(values), ret_flat);
          critic_loss_acc += tape.value(loss).value();
          GradMap grads = tape.backward(loss);
          if (cfg.lr != 0.0) critic_adam.step(result.critic, grads, cfg.lr);
        }
        ++loss_chunks;
      }
    }

    // -- logging --
    PPOLogEntry entry;
    entry.update = update;
    double kl = 0.0, len = 0.0, rm_mean = 0.0, gold_mean = 0.0;
    std::size_t kl_steps = 0;
    bool all_gold = true;
    for (const RolloutRecord& rec : records) {
      rm_mean += rec.rm_score;
      len += static_cast<double>(rec.traj.actions.size());
      for (std::size_t t = 0; t < rec.traj.logprobs_old.size(); ++t) {
        kl += rec.traj.logprobs_old[t] - rec.ref_logprobs[t];
        ++kl_steps;
      }
      if (rec.has_gold)
        gold_mean += rec.gold;
      else
        all_gold = false;
    }
    const double n_rolls = static_cast<double>(records.size());
    entry.mean_reward_rm = rm_mean / n_rolls;
    entry.mean_kl = kl_steps ? kl / static_cast<double>(kl_steps) : 0.0;
    entry.mean_len = len / n_rolls;
    if (all_gold) entry.mean_reward_gold = gold_mean / n_rolls;
    entry.policy_loss = policy_loss_acc / static_cast<double>(loss_chunks);
    entry.critic_loss = critic_loss_acc / static_cast<double>(loss_chunks);
    result.log.push_back(entry);
  }
  return result;
}

}  // namespace prefrl
