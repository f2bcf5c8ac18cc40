#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "prefrl/model.hpp"
#include "prefrl/sampling.hpp"

namespace prefrl {

// One rollout: per-step action tokens, rollout-time log-probs and values,
// and per-step rewards. All lists share length T >= 1.
struct Trajectory {
  SequenceSample sample;
  std::vector<Token> actions;
  std::vector<double> logprobs_old;
  std::vector<double> values;
  std::vector<double> rewards;
};

void validate_trajectory(const Trajectory& traj, bool rewards_required);

struct AdvantageTable {
  std::vector<double> delta;      // td errors
  std::vector<double> advantage;  // gae
  std::vector<double> ret;        // advantage + value, exactly
};

enum class RewardMode { terminal_only, per_step };
enum class RatioDenominator { rollout_snapshot, reference_model };

struct PPOConfig {
  double gamma = 0.99;
  double gae_beta = 0.95;
  double clip_epsilon = 0.2;
  double lr = 5e-5;
  std::size_t batch_size = 256;  // trajectories per optimizer step
  std::size_t updates = 0;
  std::size_t rollouts_per_update = 16;
  double kl_penalty_coeff = 0.0;
  RatioDenominator ratio_denominator = RatioDenominator::rollout_snapshot;
  RewardMode reward_mode = RewardMode::terminal_only;
  bool normalize_advantages = true;
  std::size_t epochs_per_update = 1;
  std::size_t max_response_len = 16;
  Token stop_token = 0;
};

// Fills traj.rewards. terminal_only puts the whole-sequence score on the last
// step; per_step scores the sequence truncated at each step. A positive KL
// coefficient subtracts coeff * (logpi_theta - logpi_ref) per step.
Trajectory assign_rewards(const ModelParams& rm, Trajectory traj, RewardMode mode,
                          const ScoreOptions& opts = {}, double kl_penalty_coeff = 0.0,
                          const ModelParams* reference = nullptr);

// delta_t = r_t + gamma * V(s_{t+1}) - V(s_t)   with V(s_{T+1}) = 0
// A_t     = delta_t + gamma * beta * A_{t+1}    with A_{T+1} = 0
// R_t     = A_t + V(s_t)
AdvantageTable gae(const Trajectory& traj, double gamma, double beta);

// Clipped surrogate objective, negated into a loss:
//   J_t = min(rho_t * A_t, clip(rho_t, 1-eps, 1+eps) * A_t),  rho = exp(new - old)
//   loss = -mean_t J_t
double ppo_policy_loss(const std::vector<double>& new_logprobs,
                       const std::vector<double>& old_logprobs,
                       const std::vector<double>& advantages, double epsilon);
Var ppo_policy_loss_var(Tape& tape, Var new_logprobs, const std::vector<double>& old_logprobs,
                        const std::vector<double>& advantages, double epsilon);

// Sum over t of (V(s_t) - R_t)^2; the mean is reported separately for logs.
double critic_loss(const std::vector<double>& values, const std::vector<double>& returns);
Var critic_loss_var(Tape& tape, Var values, const std::vector<double>& returns);

// A prompt the policy trains against, with an optional hidden gold evaluator
// (normalized to [0,1]) used only for logging and acceptance checks.
struct PromptCase {
  std::vector<Token> prompt;
  std::optional<ModalContext> modal;
  std::function<double(const std::vector<Token>&)> gold_reward;  // may be empty
};

struct PPOLogEntry {
  std::size_t update = 0;
  double mean_reward_rm = 0.0;
  std::optional<double> mean_reward_gold;
  double mean_kl = 0.0;
  double mean_len = 0.0;
  double policy_loss = 0.0;
  double critic_loss = 0.0;
};

struct PPOResult {
  ModelParams policy;
  ModelParams critic;
  std::vector<PPOLogEntry> log;
};

// Rollouts -> reward assignment -> GAE -> policy and critic steps, repeated
// cfg.updates times. The reference model must be the frozen starting policy;
// rollouts sample at temperature 1 so the ratio compares the distribution
// the data came from.
PPOResult ppo_train(const ModelParams& policy_init, const ModelParams& rm,
                    const ModelParams& reference, const std::vector<PromptCase>& prompts,
                    const PPOConfig& cfg, std::uint64_t seed, const ScoreOptions& rm_opts = {});

}  // namespace prefrl
