#include "prefrl/datapipe.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <memory>
#include <numeric>
#include <set>

#include "prefrl/optim.hpp"
#include "prefrl/parallel.hpp"

namespace prefrl {

using namespace tokens;

std::string to_string(TaskKind k) {
  switch (k) {
    case TaskKind::arithmetic: return "arithmetic";
    case TaskKind::instruction_constraint: return "instruction_constraint";
    case TaskKind::modal_count: return "modal_count";
    case TaskKind::freeform_gold: return "freeform_gold";
  }
  fail("task_kind: bad enum value");
}

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "arithmetic") return TaskKind::arithmetic;
  if (s == "instruction_constraint") return TaskKind::instruction_constraint;
  if (s == "modal_count") return TaskKind::modal_count;
  if (s == "freeform_gold") return TaskKind::freeform_gold;
  fail("task_kind: unknown value '" + s + "'");
}

DomainTag domain_tag_for(TaskKind k) {
  switch (k) {
    case TaskKind::arithmetic: return DomainTag::reasoning;
    case TaskKind::instruction_constraint: return DomainTag::instruction_following;
    case TaskKind::modal_count: return DomainTag::video_surrogate;
    case TaskKind::freeform_gold: return DomainTag::general;
  }
  fail("task_kind: bad enum value");
}

bool has_verifier(TaskKind k) { return k != TaskKind::freeform_gold; }

std::string to_string(ConstraintType t) {
  switch (t) {
    case ConstraintType::exact_length: return "exact_length";
    case ConstraintType::must_contain: return "must_contain";
    case ConstraintType::must_not_contain: return "must_not_contain";
  }
  fail("constraint: bad enum value");
}

ConstraintType constraint_type_from_string(const std::string& s) {
  if (s == "exact_length") return ConstraintType::exact_length;
  if (s == "must_contain") return ConstraintType::must_contain;
  if (s == "must_not_contain") return ConstraintType::must_not_contain;
  fail("constraint: unknown type '" + s + "'");
}

namespace {

constexpr Token kContentWords[4] = {kWord3, kWord5, kWord6, kWord7};

struct ArithCase {
  int a, b, result;
  Token op;
};

const std::vector<ArithCase>& arithmetic_cases() {
  static const std::vector<ArithCase> cases = [] {
    std::vector<ArithCase> v;
    for (int a = 0; a <= 9; ++a)
      for (int b = 0; b <= 9; ++b) {
        if (a + b <= 9) v.push_back({a, b, a + b, kPlus});
        if (a - b >= 0) v.push_back({a, b, a - b, kMinus});
        if (a * b <= 9) v.push_back({a, b, a * b, kTimes});
      }
    return v;
  }();
  return cases;
}

}  // namespace

std::vector<SyntheticTask> gen_tasks(std::size_t count, const TaskMix& mix,
                                     std::size_t modal_dim, std::uint64_t seed) {
  require(modal_dim >= 1 && modal_dim <= 9,
          "gen_tasks: modal_dim must be in [1, 9] so counts stay single-digit");
  const double weights[4] = {mix.arithmetic, mix.instruction_constraint, mix.modal_count,
                             mix.freeform_gold};
  double total = 0.0;
  for (double w : weights) {
    require(w >= 0.0, "gen_tasks: negative task-mix weight");
    total += w;
  }
  require(total > 0.0, "gen_tasks: task mix has zero total weight");

  const std::uint64_t gold_fn_id = derive_seed(seed, "goldfn");
  std::vector<SyntheticTask> tasks;
  tasks.reserve(count);

  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = make_stream(seed, "tasks/" + std::to_string(i));
    SyntheticTask task;
    task.id = i;
    task.gold_fn_id = gold_fn_id;

    const double u = rng.uniform() * total;
    double acc = 0.0;
    int kind_idx = 3;
    for (int k = 0; k < 4; ++k) {
      acc += weights[k];
      if (u < acc) {
        kind_idx = k;
        break;
      }
    }
    task.kind = static_cast<TaskKind>(kind_idx);

    switch (task.kind) {
      case TaskKind::arithmetic: {
        const auto& cases = arithmetic_cases();
        const ArithCase c =
            cases[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(cases.size())))];
        task.prompt = {digit(c.a), c.op, digit(c.b)};
        task.gold_answer = {digit(c.result)};
        break;
      }
      case TaskKind::instruction_constraint: {
        const int which = static_cast<int>(rng.uniform_int(0, 3));
        Constraint cons;
        if (which == 0) {
          cons.type = ConstraintType::exact_length;
          cons.param = static_cast<int>(rng.uniform_int(1, 6));
          task.prompt = {kWord0, digit(cons.param)};
        } else {
          const Token word = kContentWords[rng.uniform_int(0, 4)];
          cons.type = which == 1 ? ConstraintType::must_contain : ConstraintType::must_not_contain;
          cons.param = word;
          task.prompt = {which == 1 ? kWord1 : kWord2, word};
        }
        task.constraint = cons;
        break;
      }
      case TaskKind::modal_count: {
        ModalContext modal;
        modal.observation.resize(modal_dim);
        int on = 0;
        for (double& v : modal.observation) {
          const bool bit = rng.uniform() < 0.5;
          v = bit ? rng.uniform(0.6, 1.0) : rng.uniform(0.0, 0.4);
          on += bit ? 1 : 0;
        }
        task.modal = std::move(modal);
        task.prompt = {kWord4};
        task.gold_answer = {digit(on)};
        break;
      }
      case TaskKind::freeform_gold: {
        const std::int64_t len = rng.uniform_int(2, 5);
        for (std::int64_t w = 0; w < len; ++w)
          task.prompt.push_back(kContentWords[rng.uniform_int(0, 4)]);
        break;
      }
    }
    tasks.push_back(std::move(task));
  }
  return tasks;
}

std::vector<Token> content_tokens(const std::vector<Token>& response) {
  std::vector<Token> out;
  out.reserve(response.size());
  for (Token t : response)
    if (t != kStop && t != kFiller) out.push_back(t);
  return out;
}

std::optional<std::vector<Token>> answer_span(const std::vector<Token>& response) {
  std::size_t delim_pos = response.size();
  for (std::size_t i = response.size(); i-- > 0;) {
    if (response[i] == kDelim) {
      delim_pos = i;
      break;
    }
  }
  if (delim_pos == response.size()) return std::nullopt;
  std::vector<Token> span(response.begin() + static_cast<std::ptrdiff_t>(delim_pos) + 1,
                          response.end());
  return content_tokens(span);
}

bool verify(const SyntheticTask& task, const std::vector<Token>& response) {
  require(has_verifier(task.kind),
          "verify: no verifier registered for task kind " + to_string(task.kind));
  switch (task.kind) {
    case TaskKind::arithmetic:
    case TaskKind::modal_count: {
      const auto span = answer_span(response);
      if (!span) return false;  // unverifiable, not an error
      return *span == task.gold_answer;
    }
    case TaskKind::instruction_constraint: {
      require(task.constraint.has_value(), "verify: constraint task without a constraint");
      const std::vector<Token> content = content_tokens(response);
      const Constraint& c = *task.constraint;
      switch (c.type) {
        case ConstraintType::exact_length:
          return content.size() == static_cast<std::size_t>(c.param);
        case ConstraintType::must_contain:
          return std::find(content.begin(), content.end(), static_cast<Token>(c.param)) !=
                 content.end();
        case ConstraintType::must_not_contain:
          return std::find(content.begin(), content.end(), static_cast<Token>(c.param)) ==
                 content.end();
      }
      fail("verify: bad constraint type");
    }
    default:
      fail("verify: unreachable");
  }
}

GoldReward::GoldReward(std::uint64_t fn_id, std::size_t vocab) {
  require(vocab >= kMinVocab, "gold_reward: vocabulary below the synthetic token set");
  Rng rng(fn_id);
  weights_.resize(vocab + 2);
  const double scale = 1.0 / static_cast<double>(weights_.size());
  for (double& w : weights_) w = rng.uniform(-1.0, 1.0) * scale;
}

double GoldReward::feature_score(const std::vector<Token>& response) const {
  const std::size_t vocab = weights_.size() - 2;
  double score = 0.0;
  const double denom = std::max<std::size_t>(1, response.size());
  bool has_delim = false;
  for (Token t : response) {
    if (t == kDelim) has_delim = true;
    if (t >= 0 && static_cast<std::size_t>(t) < vocab)
      score += weights_[static_cast<std::size_t>(t)] / denom;
  }
  score += weights_[vocab] * std::min<double>(1.0, static_cast<double>(response.size()) / 16.0);
  score += weights_[vocab + 1] * (has_delim ? 1.0 : 0.0);
  return score;
}

double GoldReward::judge_score(const SyntheticTask& task,
                               const std::vector<Token>& response) const {
  double score = feature_score(response);
  if (has_verifier(task.kind) && verify(task, response)) score += kCorrectBonus;
  return score;
}

double GoldReward::normalized(const SyntheticTask& task,
                              const std::vector<Token>& response) const {
  if (has_verifier(task.kind)) return verify(task, response) ? 1.0 : 0.0;
  return 0.5 + 0.5 * feature_score(response);
}

std::vector<Token> gold_response(const SyntheticTask& task) {
  switch (task.kind) {
    case TaskKind::arithmetic:
    case TaskKind::modal_count: {
      std::vector<Token> out = {kDelim};
      out.insert(out.end(), task.gold_answer.begin(), task.gold_answer.end());
      out.push_back(kStop);
      return out;
    }
    case TaskKind::instruction_constraint: {
      const Constraint& c = *task.constraint;
      switch (c.type) {
        case ConstraintType::exact_length: {
          std::vector<Token> out(static_cast<std::size_t>(c.param), kWord3);
          out.push_back(kStop);
          return out;
        }
        case ConstraintType::must_contain:
          return {static_cast<Token>(c.param), kStop};
        case ConstraintType::must_not_contain:
          return {static_cast<Token>(c.param) == kWord3 ? kWord5 : kWord3, kStop};
      }
      fail("gold_response: bad constraint type");
    }
    case TaskKind::freeform_gold: {
      Rng rng(derive_seed(task.id, "freeform-demo"));
      std::vector<Token> out;
      const std::int64_t len = rng.uniform_int(1, 4);
      for (std::int64_t i = 0; i < len; ++i)
        out.push_back(kContentWords[rng.uniform_int(0, 4)]);
      out.push_back(kStop);
      return out;
    }
  }
  fail("gold_response: bad task kind");
}

// Arbitrary token soup over the whole synthetic set (fillers and delimiters
// included). Broad negative coverage keeps the reward model from inflating
// scores on sequences far from the demonstration distribution.
std::vector<Token> random_junk_response(Rng& rng) {
  // at least two content tokens, so legitimate one-word answers never look
  // like junk to the reward model
  const std::int64_t len = rng.uniform_int(2, 8);
  std::vector<Token> out;
  for (std::int64_t i = 0; i < len; ++i)
    out.push_back(static_cast<Token>(rng.uniform_int(1, static_cast<std::int64_t>(kMinVocab))));
  out.push_back(kStop);
  return out;
}

std::vector<Token> corrupt_response(const SyntheticTask& task, Rng& rng) {
  if (has_verifier(task.kind) && rng.uniform() < 0.34) {
    // junk negative, guarded so it cannot accidentally verify
    for (int attempt = 0; attempt < 4; ++attempt) {
      std::vector<Token> junk = random_junk_response(rng);
      if (!verify(task, junk)) return junk;
    }
  }
  switch (task.kind) {
    case TaskKind::arithmetic:
    case TaskKind::modal_count: {
      const int gold_digit = task.gold_answer[0] - kDigit0;
      const int mode = static_cast<int>(rng.uniform_int(0, 3));
      if (mode == 0) {
        int wrong = static_cast<int>(rng.uniform_int(0, 10));
        if (wrong == gold_digit) wrong = (wrong + 1) % 10;
        return {kDelim, digit(wrong), kStop};
      }
      if (mode == 1) return {task.gold_answer[0], kStop};  // missing delimiter
      return {kContentWords[rng.uniform_int(0, 4)], kContentWords[rng.uniform_int(0, 4)], kStop};
    }
    case TaskKind::instruction_constraint: {
      const Constraint& c = *task.constraint;
      switch (c.type) {
        case ConstraintType::exact_length: {
          int wrong = static_cast<int>(rng.uniform_int(1, 7));
          if (wrong == c.param) wrong = wrong == 6 ? 1 : wrong + 1;
          std::vector<Token> out(static_cast<std::size_t>(wrong), kWord3);
          out.push_back(kStop);
          return out;
        }
        case ConstraintType::must_contain: {
          Token w = kContentWords[rng.uniform_int(0, 4)];
          if (w == static_cast<Token>(c.param)) w = w == kWord3 ? kWord5 : kWord3;
          return {w, kStop};
        }
        case ConstraintType::must_not_contain:
          return {static_cast<Token>(c.param), kStop};
      }
      fail("corrupt_response: bad constraint type");
    }
    case TaskKind::freeform_gold: {
      std::vector<Token> out;
      const std::int64_t len = rng.uniform_int(1, 4);
      for (std::int64_t i = 0; i < len; ++i)
        out.push_back(kContentWords[rng.uniform_int(0, 4)]);
      out.push_back(kStop);
      return out;
    }
  }
  fail("corrupt_response: bad task kind");
}

namespace {

PreferencePair pair_from(const SyntheticTask& task, std::vector<Token> chosen,
                         std::vector<Token> rejected, SourceTag source) {
  PreferencePair pair;
  pair.id = task.id;
  pair.prompt = task.prompt;
  pair.modal = task.modal;
  pair.chosen = std::move(chosen);
  pair.rejected = std::move(rejected);
  pair.domain_tag = domain_tag_for(task.kind);
  pair.source_tag = source;
  validate_pair(pair);
  return pair;
}

}  // namespace

BuildPairsResult build_pairs(const ModelParams& policy, const std::vector<SyntheticTask>& tasks,
                             std::size_t k_candidates, JudgeKind judge,
                             const DecodeConfig& decode, std::uint64_t seed,
                             bool gold_answer_fallback) {
  require(k_candidates >= 2, "build_pairs: k_candidates must be >= 2");
  const std::size_t vocab = model_dims(policy).vocab;

  std::vector<std::vector<std::vector<Token>>> candidates(tasks.size());
  for (auto& c : candidates) c.resize(k_candidates);
  parallel_for(tasks.size() * k_candidates, [&](std::size_t flat) {
    const std::size_t ti = flat / k_candidates;
    const std::size_t j = flat % k_candidates;
    const SyntheticTask& task = tasks[ti];
    const std::uint64_t cand_seed =
        derive_seed(seed, "pairs/" + std::to_string(task.id) + "/" + std::to_string(j));
    candidates[ti][j] = generate(policy, task.prompt, task.modal, decode, cand_seed);
  });

  BuildPairsResult result;
  for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
    const SyntheticTask& task = tasks[ti];
    const auto& cands = candidates[ti];

    if (judge == JudgeKind::verifier) {
      if (!has_verifier(task.kind)) {
        ++result.skipped;
        continue;
      }
      std::optional<std::size_t> first_correct, first_incorrect;
      for (std::size_t j = 0; j < cands.size(); ++j) {
        if (verify(task, cands[j])) {
          if (!first_correct) first_correct = j;
        } else if (!first_incorrect) {
          first_incorrect = j;
        }
      }
      if (!first_incorrect || (!first_correct && !gold_answer_fallback)) {
        ++result.skipped;
        continue;
      }
      std::vector<Token> chosen =
          first_correct ? cands[*first_correct] : gold_response(task);
      if (chosen == cands[*first_incorrect]) {
        ++result.skipped;
        continue;
      }
      result.pairs.push_back(
          pair_from(task, std::move(chosen), cands[*first_incorrect], SourceTag::verifier));
    } else {
      GoldReward gold(task.gold_fn_id, vocab);
      std::vector<double> scores(cands.size());
      for (std::size_t j = 0; j < cands.size(); ++j)
        scores[j] = gold.judge_score(task, cands[j]);

      // Order by (score, content) so the labels are invariant to candidate
      // order; a pair is only emitted when the scores actually differ.
      auto better = [&](std::size_t x, std::size_t y) {
        if (scores[x] != scores[y]) return scores[x] > scores[y];
        return cands[x] > cands[y];
      };
      std::size_t best = 0, worst = 0;
      for (std::size_t j = 1; j < cands.size(); ++j) {
        if (better(j, best)) best = j;
        if (better(worst, j)) worst = j;
      }
      if (scores[best] == scores[worst] || cands[best] == cands[worst]) {
        ++result.skipped;
        continue;
      }
      result.pairs.push_back(pair_from(task, cands[best], cands[worst], SourceTag::judge));
    }
  }

  require(!result.pairs.empty(),
          "build_pairs: zero pairs produced (" + std::to_string(result.skipped) +
              " tasks skipped)");
  return result;
}

BuildPairsResult make_gold_pairs(const std::vector<SyntheticTask>& tasks,
                                 const GoldPairOptions& opts, std::uint64_t seed) {
  require(opts.pairs_per_task >= 1, "make_gold_pairs: pairs_per_task must be >= 1");
  BuildPairsResult result;
  for (const SyntheticTask& task : tasks) {
    if (!has_verifier(task.kind)) {
      ++result.skipped;
      continue;
    }
    Rng rng = make_stream(seed, "goldpairs/" + std::to_string(task.id));
    for (std::size_t rep = 0; rep < opts.pairs_per_task; ++rep) {
      // fillers go before the trailing stop token; verification ignores them
      std::vector<Token> chosen = gold_response(task);
      if (opts.chosen_pad_max > 0) {
        require(opts.chosen_pad_min <= opts.chosen_pad_max,
                "make_gold_pairs: chosen_pad_min exceeds chosen_pad_max");
        const auto pad = static_cast<std::size_t>(
            rng.uniform_int(static_cast<std::int64_t>(opts.chosen_pad_min),
                            static_cast<std::int64_t>(opts.chosen_pad_max) + 1));
        chosen.insert(chosen.end() - 1, pad, kFiller);
      }
      std::vector<Token> rejected;
      if (opts.mismatch_negatives > 0.0 && rng.uniform() < opts.mismatch_negatives) {
        for (int attempt = 0; attempt < 16 && rejected.empty(); ++attempt) {
          const SyntheticTask& donor = tasks[static_cast<std::size_t>(
              rng.uniform_int(0, static_cast<std::int64_t>(tasks.size())))];
          if (donor.id == task.id || !has_verifier(donor.kind)) continue;
          std::vector<Token> candidate = gold_response(donor);
          if (!verify(task, candidate)) rejected = std::move(candidate);
        }
      }
      if (rejected.empty()) rejected = corrupt_response(task, rng);
      if (opts.rejected_pad_max > 0) {
        const auto pad = static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(opts.rejected_pad_max) + 1));
        rejected.insert(rejected.end() - 1, pad, kFiller);
      }
      result.pairs.push_back(
          pair_from(task, std::move(chosen), std::move(rejected), SourceTag::synthetic_gold));
    }
  }
  require(!result.pairs.empty(), "make_gold_pairs: zero pairs produced");
  return result;
}

LengthFilterResult length_filter(const std::vector<PreferencePair>& pairs, double ratio_max) {
  require(ratio_max > 0.0, "length_filter: ratio_max must be positive");
  LengthFilterResult result;
  for (const PreferencePair& p : pairs) {
    const double ratio = static_cast<double>(p.chosen.size()) /
                         static_cast<double>(std::max<std::size_t>(1, p.rejected.size()));
    (ratio > ratio_max ? result.removed : result.kept).push_back(p);
  }
  return result;
}

CleaningReport clean_dataset(const ModelParams& rm, const std::vector<CleanSample>& samples,
                             const CleanThreshold& threshold, const ScoreOptions& opts) {
  require(!samples.empty(), "clean_dataset: empty input");

  CleaningReport report;
  report.sample_ids.resize(samples.size());
  report.scores.resize(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    const CleanSample& s = samples[i];
    report.sample_ids[i] = s.id;
    report.scores[i] = s.answer.empty()
                           ? -DBL_MAX
                           : reward_score(rm, SequenceSample{s.prompt, s.answer, s.modal}, opts);
  });

  std::vector<double> sorted = report.scores;
  std::sort(sorted.begin(), sorted.end());

  double cutoff;
  if (threshold.kind == CleanThreshold::Kind::absolute) {
    cutoff = threshold.value;
  } else {
    require(threshold.value >= 0.0 && threshold.value <= 100.0,
            "clean_dataset: percentile must be in [0, 100]");
    const auto k = static_cast<std::size_t>(
        std::floor(threshold.value / 100.0 * static_cast<double>(samples.size())));
    cutoff = k >= sorted.size() ? DBL_MAX : sorted[k];
  }
  report.threshold_used = cutoff;

  for (std::size_t i = 0; i < samples.size(); ++i)
    if (report.scores[i] < cutoff) report.flagged_ids.push_back(report.sample_ids[i]);

  auto rank = [&](double p) {
    const auto idx = static_cast<std::size_t>(
        std::min<double>(static_cast<double>(sorted.size() - 1),
                         std::floor(p / 100.0 * static_cast<double>(sorted.size()))));
    return sorted[idx];
  };
  report.summary = ScoreSummary{sorted.front(), rank(5), rank(25), rank(50),
                                rank(75),       rank(95), sorted.back()};
  return report;
}

CorruptCorpus make_clean_corpus(const std::vector<SyntheticTask>& tasks, double corrupt_fraction,
                                std::uint64_t seed) {
  require(corrupt_fraction >= 0.0 && corrupt_fraction < 1.0,
          "make_clean_corpus: corrupt_fraction must be in [0, 1)");

  // One sample per distinct (prompt, modal) combination; duplicated tasks
  // would create identical-score blocks that distort percentile cuts.
  CorruptCorpus corpus;
  std::set<std::string> seen;
  for (const SyntheticTask& task : tasks) {
    if (!has_verifier(task.kind)) continue;
    std::string key;
    for (Token t : task.prompt) key += std::to_string(t) + ",";
    if (task.modal)
      for (double v : task.modal->observation) key += std::to_string(v) + ";";
    if (!seen.insert(std::move(key)).second) continue;
    CleanSample s;
    s.id = task.id;
    s.prompt = task.prompt;
    s.answer = gold_response(task);
    s.modal = task.modal;
    corpus.samples.push_back(std::move(s));
  }
  require(corpus.samples.size() >= 2, "make_clean_corpus: need at least 2 verifiable tasks");

  Rng rng = make_stream(seed, "clean/corrupt");
  std::vector<std::size_t> order(corpus.samples.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);

  std::map<std::uint64_t, const SyntheticTask*> tasks_by_id;
  for (const SyntheticTask& task : tasks) tasks_by_id[task.id] = &task;

  // Swaps and modal shuffles are guarded so the injected sample is genuinely
  // wrong for its task; an accidental match would not be a corruption.
  // Donors come from a different task kind when possible, mirroring the
  // irrelevant question/answer pairings this corruption models.
  auto swap_answer = [&](std::size_t i) {
    const SyntheticTask& task = *tasks_by_id.at(corpus.samples[i].id);
    std::size_t fallback = corpus.samples.size();
    for (int attempt = 0; attempt < 24; ++attempt) {
      std::size_t j = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(corpus.samples.size())));
      if (j == i) continue;
      if (verify(task, corpus.samples[j].answer)) continue;
      if (tasks_by_id.at(corpus.samples[j].id)->kind != task.kind) {
        corpus.samples[i].answer = corpus.samples[j].answer;
        return true;
      }
      fallback = j;
    }
    if (fallback < corpus.samples.size()) {
      corpus.samples[i].answer = corpus.samples[fallback].answer;
      return true;
    }
    return false;
  };

  const auto n_corrupt = static_cast<std::size_t>(
      std::floor(corrupt_fraction * static_cast<double>(corpus.samples.size())));
  for (std::size_t c = 0; c < n_corrupt; ++c) {
    const std::size_t i = order[c];
    CleanSample& victim = corpus.samples[i];
    const SyntheticTask& task = *tasks_by_id.at(victim.id);
    int mode = static_cast<int>(rng.uniform_int(0, 3));
    if (mode == 2 && (!victim.modal || task.kind != TaskKind::modal_count)) mode = 0;

    if (mode == 2) {
      // grossly mismatched modal context: the depicted count moves as far as
      // possible from the recorded answer
      const int original = task.gold_answer[0] - kDigit0;
      const auto m = victim.modal->observation.size();
      const int target = original <= static_cast<int>(m) / 2 ? static_cast<int>(m) : 0;
      for (double& v : victim.modal->observation) {
        const bool bit = target > 0;
        v = bit ? rng.uniform(0.6, 1.0) : rng.uniform(0.0, 0.4);
      }
    } else if (mode == 0 && swap_answer(i)) {
      // mismatched QA pairing
    } else {
      victim.answer.clear();  // empty answer
    }
    corpus.corrupt_ids.push_back(victim.id);
  }
  return corpus;
}

ModelParams sft_pretrain(const ModelParams& init, const std::vector<SyntheticTask>& tasks,
                         const SftConfig& cfg, std::uint64_t seed) {
  require(!tasks.empty(), "sft_pretrain: empty task set");
  require(cfg.corrupt_prob >= 0.0 && cfg.corrupt_prob <= 1.0,
          "sft_pretrain: corrupt_prob must be in [0, 1]");

  std::vector<SequenceSample> demos;
  demos.reserve(tasks.size());
  for (const SyntheticTask& task : tasks) {
    Rng rng = make_stream(seed, "sft/demo/" + std::to_string(task.id));
    std::vector<Token> response =
        rng.uniform() < cfg.corrupt_prob
            ? (cfg.junk_corruption ? random_junk_response(rng) : corrupt_response(task, rng))
            : gold_response(task);
    demos.push_back(SequenceSample{task.prompt, std::move(response), task.modal});
  }

  ModelParams params = init;
  AdamState adam;
  Rng batch_rng = make_stream(seed, "sft/batches");
  const std::size_t batch = std::max<std::size_t>(1, std::min(cfg.batch_size, demos.size()));

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    Tape tape;
    ModelGraph graph(tape, params);
    std::vector<Var> losses;
    losses.reserve(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      const SequenceSample& demo =
          demos[static_cast<std::size_t>(batch_rng.uniform_int(0, static_cast<std::int64_t>(demos.size())))];
      losses.push_back(tape.scale(tape.mean(graph.response_logprobs(demo)), -1.0));
    }
    Var loss = tape.mean(tape.concat(losses));
    GradMap grads = tape.backward(loss);
    if (cfg.lr != 0.0) adam.step(params, grads, cfg.lr);
  }
  return params;
}

std::vector<PromptCase> to_prompt_cases(const std::vector<SyntheticTask>& tasks,
                                        std::size_t vocab) {
  std::vector<PromptCase> cases;
  cases.reserve(tasks.size());
  for (const SyntheticTask& task : tasks) {
    PromptCase pc;
    pc.prompt = task.prompt;
    pc.modal = task.modal;
    auto gold = std::make_shared<GoldReward>(task.gold_fn_id, vocab);
    auto task_copy = std::make_shared<SyntheticTask>(task);
    pc.gold_reward = [gold, task_copy](const std::vector<Token>& response) {
      return gold->normalized(*task_copy, response);
    };
    cases.push_back(std::move(pc));
  }
  return cases;
}

}  // namespace prefrl
