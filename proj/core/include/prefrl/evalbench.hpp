#pragma once

#include <string>
#include <vector>

#include "prefrl/reward.hpp"

namespace prefrl {

// Named categories of preference pairs. Names unique, every category
// non-empty; enforced at construction.
struct BenchmarkSet {
  std::vector<std::pair<std::string, std::vector<PreferencePair>>> categories;
};

void validate_benchmark(const BenchmarkSet& bench);

struct CategoryResult {
  std::string name;
  std::size_t pairs = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  double mean_chosen_len = 0.0;
  double mean_rejected_len = 0.0;
};

// macro_acc: unweighted mean of per-category accuracies.
// overall_acc: pooled correct / total.
struct BenchReport {
  std::vector<CategoryResult> categories;
  std::size_t total_pairs = 0;
  std::size_t total_correct = 0;
  double overall_acc = 0.0;
  double macro_acc = 0.0;
};

BenchReport evaluate_rm(const PairScorer& scorer, const BenchmarkSet& bench);
BenchReport evaluate_rm(const ModelParams& rm, const BenchmarkSet& bench,
                        const ScoreOptions& opts = {});

struct LengthBiasReport {
  std::size_t padding = 0;
  std::size_t pairs = 0;
  double mean_delta = 0.0;     // padded minus original chosen score
  double flip_fraction = 0.0;  // pairwise decisions changed by the padding
};

// Scores each chosen response and a variant with `padding` filler tokens
// appended, reporting the mean score delta and how often padding flips the
// pairwise decision.
LengthBiasReport length_bias_probe(const ModelParams& rm, const std::vector<PreferencePair>& pairs,
                                   std::size_t padding, Token filler_token,
                                   const ScoreOptions& opts = {});

std::string render_bench_table(const BenchReport& report);

}  // namespace prefrl
