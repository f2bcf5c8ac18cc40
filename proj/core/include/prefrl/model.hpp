#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "prefrl/params.hpp"
#include "prefrl/tape.hpp"

namespace prefrl {

using Token = std::int32_t;

// Synthetic stand-in for encoded image/video features: a fixed-length real
// vector consumed through a frozen encoder + projector as a prefix embedding.
struct ModalContext {
  std::vector<double> observation;
};

struct SequenceSample {
  std::vector<Token> prompt;
  std::vector<Token> response;
  std::optional<ModalContext> modal;
};

struct ModelDims {
  std::size_t vocab = 24;
  std::size_t hidden = 48;
  std::size_t modal = 8;
};

struct ScoreOptions {
  // Default pools the score head over every position (modal prefix + prompt +
  // response). Response-only pooling is kept as an ablation switch.
  bool response_only_pooling = false;
};

// Parameter layout:
//   embed            [V x d]   trainable
//   modal_encoder    [m x m]   frozen
//   modal_projector  [m x d]   frozen
//   gru_{wz,uz,wr,ur,wh,uh}  [d x d], gru_{bz,br,bh} [1 x d]   trainable
//   lm_head          [d x V]   trainable
//   value_head       [d x 1]   trainable
//   score_head       [d x 1]   trainable
ModelParams init_model_params(const ModelDims& dims, std::uint64_t seed);

ModelDims model_dims(const ModelParams& params);

// Critic starts as a copy of the reward model with the score head copied
// into the value head.
ModelParams make_critic_init(const ModelParams& reward_model);

// Taped view of the model. Creating one registers every parameter tensor as
// a leaf on the tape; all forward passes for one gradient step share it.
class ModelGraph {
 public:
  ModelGraph(Tape& tape, const ModelParams& params);

  const ModelDims& dims() const { return dims_; }

  Var initial_hidden() const;
  Var embed_token(Token t) const;
  Var modal_prefix(const ModalContext& modal) const;
  Var step(Var h_prev, Var x) const;  // GRU cell
  Var lm_logits(Var h) const;         // [1 x V]

  // Prefix inputs in order: modal prefix (if present), prompt, response.
  std::vector<Var> input_embeddings(const SequenceSample& sample) const;
  std::vector<Var> hidden_states(const SequenceSample& sample) const;

  // Score-head output over pooled hidden states. Requires a non-empty
  // response.
  Var reward_score(const SequenceSample& sample, const ScoreOptions& opts = {}) const;

  // log softmax of the lm head at each response position, evaluated at the
  // realized token; concatenated into a length-R vector.
  Var response_logprobs(const SequenceSample& sample) const;

  // Value head over the pooled prefix ending at each response position
  // (same pooling structure as the score head, so a critic initialized from
  // a reward model reproduces r(x, y) at the final step).
  Var response_values(const SequenceSample& sample, const ScoreOptions& opts = {}) const;

  // Score of the sequence truncated at each response position (inclusive).
  // The last entry equals reward_score exactly.
  std::vector<Var> truncated_scores(const SequenceSample& sample,
                                    const ScoreOptions& opts = {}) const;

 private:
  Var head_over_pool(const std::vector<Var>& hidden, std::size_t upto, std::size_t pool_start,
                     const char* head_name) const;

  Tape* tape_;
  ModelDims dims_;
  std::map<std::string, Var> leaves_;
};

// Tapeless conveniences (forward values only).
std::vector<std::vector<double>> encode(const ModelParams& params, const SequenceSample& sample);
double reward_score(const ModelParams& params, const SequenceSample& sample,
                    const ScoreOptions& opts = {});
std::vector<double> policy_logprobs(const ModelParams& params, const SequenceSample& sample);
std::vector<double> value_estimates(const ModelParams& params, const SequenceSample& sample,
                                    const ScoreOptions& opts = {});
std::size_t encoded_length(const SequenceSample& sample);

// Incremental forward pass for autoregressive sampling. Token pushes extend
// the same arithmetic the full-sequence pass performs, so recorded
// log-probabilities match policy_logprobs bit for bit.
class SequenceEncoder {
 public:
  SequenceEncoder(const ModelParams& params, const std::vector<Token>& prompt,
                  const std::optional<ModalContext>& modal);
  ~SequenceEncoder();

  void push(Token t);
  std::vector<double> next_logits() const;
  // log softmax of next_logits at temperature 1
  std::vector<double> next_logprobs() const;
  std::size_t consumed() const { return consumed_; }

 private:
  std::unique_ptr<Tape> tape_;
  std::unique_ptr<ModelGraph> graph_;
  Var h_;
  std::size_t consumed_ = 0;
};

}  // namespace prefrl
