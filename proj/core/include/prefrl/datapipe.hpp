#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "prefrl/reward.hpp"
#include "prefrl/rl.hpp"
#include "prefrl/rng.hpp"
#include "prefrl/sampling.hpp"

namespace prefrl {

// Fixed synthetic token set. Vocabularies must be at least kMinVocab wide;
// larger vocabularies just leave the tail unused by the task generator.
namespace tokens {
constexpr Token kStop = 0;
constexpr Token kDelim = 1;    // precedes the final answer span
constexpr Token kFiller = 2;   // semantically inert; ignored by verifiers
constexpr Token kDigit0 = 3;   // .. kDigit0 + 9
constexpr Token kPlus = 13;
constexpr Token kMinus = 14;
constexpr Token kTimes = 15;
constexpr Token kWord0 = 16;   // marker: exact-length constraint
constexpr Token kWord1 = 17;   // marker: must-contain constraint
constexpr Token kWord2 = 18;   // marker: must-not-contain constraint
constexpr Token kWord3 = 19;   // content word
constexpr Token kWord4 = 20;   // marker: modal count question
constexpr Token kWord5 = 21;   // content word
constexpr Token kWord6 = 22;   // content word
constexpr Token kWord7 = 23;   // content word
constexpr std::size_t kMinVocab = 24;

inline Token digit(int d) {
  require(d >= 0 && d <= 9, "tokens: digit out of range");
  return kDigit0 + d;
}
}  // namespace tokens

enum class TaskKind { arithmetic, instruction_constraint, modal_count, freeform_gold };

std::string to_string(TaskKind k);
TaskKind task_kind_from_string(const std::string& s);
DomainTag domain_tag_for(TaskKind k);
bool has_verifier(TaskKind k);

enum class ConstraintType { exact_length, must_contain, must_not_contain };

std::string to_string(ConstraintType t);
ConstraintType constraint_type_from_string(const std::string& s);

struct Constraint {
  ConstraintType type = ConstraintType::exact_length;
  int param = 0;  // length k, or the token id
};

struct SyntheticTask {
  std::uint64_t id = 0;
  TaskKind kind = TaskKind::arithmetic;
  std::vector<Token> prompt;
  std::optional<ModalContext> modal;
  std::vector<Token> gold_answer;       // answer-span kinds only
  std::optional<Constraint> constraint; // instruction_constraint only
  std::uint64_t gold_fn_id = 0;         // seed of the hidden judge functional
};

struct TaskMix {
  double arithmetic = 1.0;
  double instruction_constraint = 1.0;
  double modal_count = 0.5;
  double freeform_gold = 0.5;
};

std::vector<SyntheticTask> gen_tasks(std::size_t count, const TaskMix& mix,
                                     std::size_t modal_dim, std::uint64_t seed);

// Content tokens = everything except stop and filler. The answer span is the
// content after the last delimiter. Filler stays invisible so probe padding
// can never change a verification outcome.
std::vector<Token> content_tokens(const std::vector<Token>& response);
std::optional<std::vector<Token>> answer_span(const std::vector<Token>& response);

// Deterministic predicate comparing a response against the task's ground
// truth. A missing answer delimiter verifies false rather than erroring.
bool verify(const SyntheticTask& task, const std::vector<Token>& response);

// Hidden gold judge: a fixed random linear functional over response feature
// counts plus a correctness bonus for verifiable kinds. Stands in for an
// external pairwise judge; normalized() maps to [0,1] for metrics.
class GoldReward {
 public:
  GoldReward(std::uint64_t fn_id, std::size_t vocab);

  double feature_score(const std::vector<Token>& response) const;  // in [-1, 1]
  double judge_score(const SyntheticTask& task, const std::vector<Token>& response) const;
  double normalized(const SyntheticTask& task, const std::vector<Token>& response) const;

  static constexpr double kCorrectBonus = 4.0;

 private:
  std::vector<double> weights_;
};

// Canonical correct demonstration for a task (ends with the stop token).
std::vector<Token> gold_response(const SyntheticTask& task);
// Deterministically wrong response for verifiable kinds; random words for
// freeform.
std::vector<Token> corrupt_response(const SyntheticTask& task, Rng& rng);
// Token soup over the whole synthetic set; broad negative material.
std::vector<Token> random_junk_response(Rng& rng);

enum class JudgeKind { verifier, gold_reward };

struct BuildPairsResult {
  std::vector<PreferencePair> pairs;
  std::size_t skipped = 0;
};

// Samples k candidates per task from the policy and labels chosen/rejected
// either by the verifier (falling back to the gold answer when no candidate
// verifies) or by the hidden gold judge. Tasks yielding no valid pair are
// skipped and counted.
BuildPairsResult build_pairs(const ModelParams& policy, const std::vector<SyntheticTask>& tasks,
                             std::size_t k_candidates, JudgeKind judge,
                             const DecodeConfig& decode, std::uint64_t seed,
                             bool gold_answer_fallback = true);

struct GoldPairOptions {
  std::size_t chosen_pad_min = 0;    // filler count drawn from [min, max]
  std::size_t chosen_pad_max = 0;    // fillers appended before the chosen stop token
  std::size_t rejected_pad_max = 0;  // fillers appended before the rejected stop token
  std::size_t pairs_per_task = 1;    // independent corruption draws per task
  // Probability that the rejected side is another task's gold answer
  // (guarded non-verifying): mismatched question/answer negatives, the class
  // the data-cleaning application has to rank low.
  double mismatch_negatives = 0.0;
};

// Direct gold pairs (chosen = gold response, rejected = corruption) for
// verifiable tasks; freeform tasks are skipped.
BuildPairsResult make_gold_pairs(const std::vector<SyntheticTask>& tasks,
                                 const GoldPairOptions& opts, std::uint64_t seed);

struct LengthFilterResult {
  std::vector<PreferencePair> kept;
  std::vector<PreferencePair> removed;
};

// Removes pairs whose chosen response is more than ratio_max times the
// rejected length. Rejected-longer pairs are always kept. Order-preserving
// partition.
LengthFilterResult length_filter(const std::vector<PreferencePair>& pairs, double ratio_max);

struct CleanSample {
  std::uint64_t id = 0;
  std::vector<Token> prompt;
  std::vector<Token> answer;
  std::optional<ModalContext> modal;
};

struct CleanThreshold {
  enum class Kind { absolute, percentile };
  Kind kind = Kind::percentile;
  double value = 5.0;

  static CleanThreshold absolute(double v) { return {Kind::absolute, v}; }
  static CleanThreshold percentile(double p) { return {Kind::percentile, p}; }
};

struct ScoreSummary {
  double min = 0.0, p5 = 0.0, p25 = 0.0, median = 0.0, p75 = 0.0, p95 = 0.0, max = 0.0;
};

struct CleaningReport {
  std::vector<std::uint64_t> sample_ids;  // input order
  std::vector<double> scores;             // input order
  std::vector<std::uint64_t> flagged_ids;
  double threshold_used = 0.0;
  ScoreSummary summary;
};

// Scores every sample with the reward model and flags the ones strictly
// below the threshold. Percentile thresholds break ties toward flagging
// fewer. Empty answers score -DBL_MAX so they sort below everything.
CleaningReport clean_dataset(const ModelParams& rm, const std::vector<CleanSample>& samples,
                             const CleanThreshold& threshold, const ScoreOptions& opts = {});

struct CorruptCorpus {
  std::vector<CleanSample> samples;
  std::vector<std::uint64_t> corrupt_ids;
};

// Clean corpus from task gold answers with a known fraction corrupted
// (shuffled answers, empty answers, mismatched modal contexts).
CorruptCorpus make_clean_corpus(const std::vector<SyntheticTask>& tasks, double corrupt_fraction,
                                std::uint64_t seed);

struct SftConfig {
  std::size_t steps = 300;
  double lr = 5e-3;
  std::size_t batch_size = 16;
  double corrupt_prob = 0.5;  // fraction of demonstrations replaced by corruptions
  // Junk corruptions keep the per-prompt argmax on the correct continuation
  // while raising sampling entropy; targeted corruptions instead teach
  // systematic wrong answers.
  bool junk_corruption = true;
};

// Behavior cloning on task demonstrations. The corruption share keeps the
// resulting policy deliberately mediocre so preference building and PPO have
// headroom.
ModelParams sft_pretrain(const ModelParams& init, const std::vector<SyntheticTask>& tasks,
                         const SftConfig& cfg, std::uint64_t seed);

// Prompt set for PPO with the normalized gold evaluator attached.
std::vector<PromptCase> to_prompt_cases(const std::vector<SyntheticTask>& tasks,
                                        std::size_t vocab);

}  // namespace prefrl
