#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "prefrl/model.hpp"

namespace prefrl {

enum class DomainTag { general, text_rich, reasoning, instruction_following, video_surrogate };
enum class SourceTag { judge, verifier, synthetic_gold };

std::string to_string(DomainTag t);
std::string to_string(SourceTag t);
DomainTag domain_tag_from_string(const std::string& s);
SourceTag source_tag_from_string(const std::string& s);

// The unit of reward training: a prompt with a chosen and a rejected
// response. Both responses non-empty and distinct.
struct PreferencePair {
  std::uint64_t id = 0;
  std::vector<Token> prompt;
  std::optional<ModalContext> modal;
  std::vector<Token> chosen;
  std::vector<Token> rejected;
  DomainTag domain_tag = DomainTag::general;
  SourceTag source_tag = SourceTag::synthetic_gold;
};

void validate_pair(const PreferencePair& pair);

struct RMTrainConfig {
  double lr = 1e-5;
  std::size_t batch_size = 256;  // auto-scales down to the dataset size
  std::size_t max_steps = 400;
  double eval_fraction = 0.1;
  std::optional<double> length_ratio_max;  // drop pairs with chosen much longer
  std::size_t eval_every = 50;
  std::optional<double> early_stop_heldout_acc;
};

// -log(sigma(r_w - r_l)): strictly positive, strictly decreasing in the margin.
double bt_loss(double r_w, double r_l);
Var bt_loss_var(Tape& tape, Var r_w, Var r_l);

struct RMTrainLogEntry {
  std::size_t step = 0;
  double loss = 0.0;
  std::optional<double> heldout_acc;
  double lr = 0.0;
};

struct RMTrainResult {
  ModelParams params;
  std::vector<RMTrainLogEntry> log;
  std::size_t pairs_filtered_out = 0;
  std::size_t train_pairs = 0;
  std::size_t heldout_pairs = 0;
  double final_heldout_acc = 0.0;
};

RMTrainResult train_reward_model(const ModelParams& init, const std::vector<PreferencePair>& pairs,
                                 const RMTrainConfig& cfg, std::uint64_t seed,
                                 const ScoreOptions& opts = {});

// Fraction of pairs with r(x, y_w) > r(x, y_l); exact ties count as incorrect
// so an all-zero score head scores 0.
using PairScorer = std::function<double(const SequenceSample&)>;
double pairwise_accuracy(const PairScorer& scorer, const std::vector<PreferencePair>& pairs);
double pairwise_accuracy(const ModelParams& params, const std::vector<PreferencePair>& pairs,
                         const ScoreOptions& opts = {});

PairScorer make_rm_scorer(const ModelParams& params, const ScoreOptions& opts = {});

}  // namespace prefrl
