#include "prefrl/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "prefrl/parallel.hpp"
#include "prefrl/rng.hpp"

namespace prefrl {

namespace {

std::size_t argmax(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

std::vector<double> softmax_values(const std::vector<double>& logits, double temperature) {
  std::vector<double> p(logits.size());
  double m = logits[0];
  for (double v : logits) m = std::max(m, v);
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp((logits[i] - m) / temperature);
    s += p[i];
  }
  for (double& v : p) v /= s;
  return p;
}

}  // namespace

std::size_t sample_categorical(const std::vector<double>& probs, double u) {
  require(!probs.empty(), "sample_categorical: empty distribution");
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return probs.size() - 1;
}

GenerationResult generate_with_logprobs(const ModelParams& policy,
                                        const std::vector<Token>& prompt,
                                        const std::optional<ModalContext>& modal,
                                        const DecodeConfig& decode, std::uint64_t seed) {
  require(decode.max_len >= 1, "generate: max_len must be >= 1");
  require(decode.greedy || decode.temperature > 0.0,
          "generate: temperature must be positive (or greedy mode)");

  Rng rng(seed);
  SequenceEncoder enc(policy, prompt, modal);

  GenerationResult out;
  out.tokens.reserve(decode.max_len);
  out.logprobs.reserve(decode.max_len);

  for (std::size_t step = 0; step < decode.max_len; ++step) {
    const std::vector<double> logits = enc.next_logits();
    std::size_t pick;
    if (decode.greedy) {
      pick = argmax(logits);
    } else {
      pick = sample_categorical(softmax_values(logits, decode.temperature), rng.uniform());
    }
    const Token tok = static_cast<Token>(pick);
    out.tokens.push_back(tok);
    out.logprobs.push_back(enc.next_logprobs()[pick]);
    if (tok == decode.stop_token) break;
    enc.push(tok);
  }
  return out;
}

std::vector<Token> generate(const ModelParams& policy, const std::vector<Token>& prompt,
                            const std::optional<ModalContext>& modal, const DecodeConfig& decode,
                            std::uint64_t seed) {
  return generate_with_logprobs(policy, prompt, modal, decode, seed).tokens;
}

std::size_t select_best(const std::vector<ScoredCandidate>& candidates) {
  require(!candidates.empty(), "select_best: no candidates");
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i)
    if (candidates[i].rm_score > candidates[best].rm_score) best = i;
  return best;
}

BestOfNResult best_of_n(const ModelParams& policy, const ModelParams& reward_model,
                        const std::vector<Token>& prompt,
                        const std::optional<ModalContext>& modal, std::size_t n,
                        const DecodeConfig& decode, std::uint64_t seed,
                        const ScoreOptions& opts) {
  require(n >= 1, "best_of_n: n must be >= 1");

  BestOfNResult result;
  result.candidates.resize(n);
  parallel_for(n, [&](std::size_t i) {
    const std::uint64_t cand_seed = seed + i;
    std::vector<Token> tokens = generate(policy, prompt, modal, decode, cand_seed);
    SequenceSample sample{prompt, tokens, modal};
    ScoredCandidate c;
    c.rm_score = reward_score(reward_model, sample, opts);
    c.length = tokens.size();
    c.seed = cand_seed;
    c.tokens = std::move(tokens);
    result.candidates[i] = std::move(c);
  });
  result.winner_index = select_best(result.candidates);
  return result;
}

}  // namespace prefrl
