#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "prefrl/model.hpp"

namespace prefrl {

struct DecodeConfig {
  double temperature = 1.0;
  std::size_t max_len = 16;
  Token stop_token = 0;
  bool greedy = false;  // argmax mode, the temperature -> 0 limit
};

struct GenerationResult {
  std::vector<Token> tokens;      // includes the stop token when emitted
  std::vector<double> logprobs;   // model log-probs (temperature 1) per token
};

// Ancestral sampling from softmax(logits / temperature) until the stop token
// or max_len. Deterministic per seed. The recorded log-probs are the model's
// own (temperature-1) distribution, which is what PPO ratios compare.
GenerationResult generate_with_logprobs(const ModelParams& policy,
                                        const std::vector<Token>& prompt,
                                        const std::optional<ModalContext>& modal,
                                        const DecodeConfig& decode, std::uint64_t seed);

std::vector<Token> generate(const ModelParams& policy, const std::vector<Token>& prompt,
                            const std::optional<ModalContext>& modal, const DecodeConfig& decode,
                            std::uint64_t seed);

struct ScoredCandidate {
  std::vector<Token> tokens;
  double rm_score = 0.0;
  std::uint64_t seed = 0;
  std::size_t length = 0;
};

struct BestOfNResult {
  std::size_t winner_index = 0;
  std::vector<ScoredCandidate> candidates;

  const ScoredCandidate& winner() const { return candidates[winner_index]; }
};

// n independent generations with seeds seed+0 .. seed+n-1; the candidate the
// reward model scores highest wins, ties broken by lowest index.
BestOfNResult best_of_n(const ModelParams& policy, const ModelParams& reward_model,
                        const std::vector<Token>& prompt,
                        const std::optional<ModalContext>& modal, std::size_t n,
                        const DecodeConfig& decode, std::uint64_t seed,
                        const ScoreOptions& opts = {});

// Winner selection on pre-scored candidates (argmax, ties -> lowest index).
std::size_t select_best(const std::vector<ScoredCandidate>& candidates);

// Exact categorical draw by CDF inversion; probabilities need not be
// normalized beyond summing to ~1.
std::size_t sample_categorical(const std::vector<double>& probs, double u);

}  // namespace prefrl
