#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "prefrl/datapipe.hpp"
#include "support/gradcheck.hpp"

using namespace prefrl;
using namespace prefrl::testing;
using namespace prefrl::tokens;

namespace {

SyntheticTask arith_task(int a, Token op, int b, int result) {
  SyntheticTask t;
  t.kind = TaskKind::arithmetic;
  t.prompt = {digit(a), op, digit(b)};
  t.gold_answer = {digit(result)};
  t.gold_fn_id = 7;
  return t;
}

// Independent re-parse oracle, written against the span convention from
// scratch: scan for the last delimiter, then compare the remaining tokens
// (minus stop/filler) to the gold answer.
bool oracle_verify_answer(const std::vector<Token>& gold, const std::vector<Token>& resp) {
  int last_delim = -1;
  for (int i = 0; i < static_cast<int>(resp.size()); ++i)
    if (resp[static_cast<std::size_t>(i)] == kDelim) last_delim = i;
  if (last_delim < 0) return false;
  std::vector<Token> span;
  for (std::size_t i = static_cast<std::size_t>(last_delim) + 1; i < resp.size(); ++i)
    if (resp[i] != kStop && resp[i] != kFiller) span.push_back(resp[i]);
  return span == gold;
}

}  // namespace

TEST_CASE("verifier anchor cases") {
  const SyntheticTask add = arith_task(2, kPlus, 3, 5);
  SUBCASE("exact answer span matches") {
    CHECK(verify(add, {kWord3, kDelim, digit(5), kStop}));
    CHECK(verify(add, {kDelim, digit(5), kStop}));
    CHECK_FALSE(verify(add, {kDelim, digit(4), kStop}));
  }
  SUBCASE("missing delimiter is false, not an error") {
    CHECK_FALSE(verify(add, {digit(5), kStop}));
    CHECK_FALSE(verify(add, {}));
  }
  SUBCASE("filler and stop are invisible to the span") {
    CHECK(verify(add, {kDelim, digit(5), kFiller, kFiller, kStop}));
    CHECK(verify(add, {kDelim, kFiller, digit(5)}));
  }
  SUBCASE("last delimiter wins") {
    CHECK(verify(add, {kDelim, digit(4), kDelim, digit(5), kStop}));
  }
  SUBCASE("length constraint counts content tokens only") {
    SyntheticTask t;
    t.kind = TaskKind::instruction_constraint;
    t.constraint = Constraint{ConstraintType::exact_length, 4};
    CHECK(verify(t, {kWord3, kWord5, kWord3, kWord6, kStop}));
    CHECK_FALSE(verify(t, {kWord3, kWord5, kWord3, kWord6, kWord7, kStop}));
    CHECK(verify(t, {kWord3, kFiller, kWord5, kWord3, kWord6, kStop}));  // filler ignored
  }
  SUBCASE("must contain / must not contain") {
    SyntheticTask has;
    has.kind = TaskKind::instruction_constraint;
    has.constraint = Constraint{ConstraintType::must_contain, kWord5};
    CHECK(verify(has, {kWord3, kWord5, kStop}));
    CHECK_FALSE(verify(has, {kWord3, kStop}));

    SyntheticTask hasnt;
    hasnt.kind = TaskKind::instruction_constraint;
    hasnt.constraint = Constraint{ConstraintType::must_not_contain, kWord5};
    CHECK(verify(hasnt, {kWord3, kStop}));
    CHECK_FALSE(verify(hasnt, {kWord3, kWord5, kStop}));
  }
  SUBCASE("freeform has no verifier") {
    SyntheticTask t;
    t.kind = TaskKind::freeform_gold;
    CHECK_THROWS_WITH_AS(verify(t, {kWord3}), doctest::Contains("freeform"), Error);
  }
}

TEST_CASE("verifier agrees with an independent re-parse oracle on random responses") {
  Rng rng(201);
  const SyntheticTask task = arith_task(3, kTimes, 2, 6);
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<Token> resp;
    const auto len = static_cast<std::size_t>(rng.uniform_int(0, 8));
    for (std::size_t i = 0; i < len; ++i)
      resp.push_back(static_cast<Token>(rng.uniform_int(0, 16)));
    CHECK(verify(task, resp) == oracle_verify_answer(task.gold_answer, resp));
  }
}

TEST_CASE("gen_tasks produces verifiable, well-formed tasks") {
  const std::vector<SyntheticTask> tasks = gen_tasks(200, TaskMix{1, 1, 1, 1}, 8, 202);
  CHECK(tasks.size() == 200);
  std::set<int> kinds_seen;
  for (const SyntheticTask& t : tasks) {
    kinds_seen.insert(static_cast<int>(t.kind));
    for (Token tok : t.prompt) CHECK(static_cast<std::size_t>(tok) < kMinVocab);
    if (has_verifier(t.kind)) {
      CHECK(verify(t, gold_response(t)));
      Rng rng(derive_seed(203, std::to_string(t.id)));
      for (int rep = 0; rep < 3; ++rep) CHECK_FALSE(verify(t, corrupt_response(t, rng)));
    }
    if (t.kind == TaskKind::modal_count) {
      REQUIRE(t.modal.has_value());
      int on = 0;
      for (double v : t.modal->observation) on += v > 0.5 ? 1 : 0;
      CHECK(t.gold_answer == std::vector<Token>{digit(on)});
    }
  }
  CHECK(kinds_seen.size() == 4);
  // determinism
  const std::vector<SyntheticTask> again = gen_tasks(200, TaskMix{1, 1, 1, 1}, 8, 202);
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    CHECK(tasks[i].kind == again[i].kind);
    CHECK(tasks[i].prompt == again[i].prompt);
  }
}

TEST_CASE("gold reward functional") {
  const std::vector<SyntheticTask> tasks = gen_tasks(50, TaskMix{1, 0, 0, 1}, 8, 204);
  const GoldReward gold(tasks[0].gold_fn_id, 24);
  Rng rng(205);
  for (const SyntheticTask& t : tasks) {
    const std::vector<Token> good = gold_response(t);
    if (has_verifier(t.kind)) {
      const std::vector<Token> bad = corrupt_response(t, rng);
      // correctness bonus dominates the feature functional
      CHECK(gold.judge_score(t, good) - gold.judge_score(t, bad) > 1.0);
      CHECK(gold.normalized(t, good) == 1.0);
      CHECK(gold.normalized(t, bad) == 0.0);
    } else {
      const double n = gold.normalized(t, good);
      CHECK(n >= 0.0);
      CHECK(n <= 1.0);
    }
    CHECK(std::abs(gold.feature_score(good)) <= 1.0);
  }
}

TEST_CASE("build_pairs in verifier mode") {
  const ModelDims dims{24, 8, 4};
  const ModelParams policy = tiny_model(206, dims.vocab, dims.hidden, dims.modal).params;
  const std::vector<SyntheticTask> tasks = gen_tasks(40, TaskMix{1, 1, 0, 0.3}, 4, 207);
  DecodeConfig decode;
  decode.max_len = 6;

  const BuildPairsResult r = build_pairs(policy, tasks, 4, JudgeKind::verifier, decode, 208);
  CHECK(!r.pairs.empty());
  CHECK(r.pairs.size() + r.skipped == tasks.size());

  std::map<std::uint64_t, const SyntheticTask*> by_id;
  for (const SyntheticTask& t : tasks) by_id[t.id] = &t;
  for (const PreferencePair& p : r.pairs) {
    const SyntheticTask& task = *by_id.at(p.id);
    // invariant: every pair satisfies verify(chosen) and not verify(rejected)
    CHECK(verify(task, p.chosen));
    CHECK_FALSE(verify(task, p.rejected));
    CHECK(p.source_tag == SourceTag::verifier);
    CHECK(p.domain_tag == domain_tag_for(task.kind));
  }

  SUBCASE("k < 2 errors") {
    CHECK_THROWS_AS(build_pairs(policy, tasks, 1, JudgeKind::verifier, decode, 1), Error);
  }
  SUBCASE("deterministic for a fixed seed") {
    const BuildPairsResult again = build_pairs(policy, tasks, 4, JudgeKind::verifier, decode, 208);
    REQUIRE(again.pairs.size() == r.pairs.size());
    for (std::size_t i = 0; i < r.pairs.size(); ++i) {
      CHECK(again.pairs[i].chosen == r.pairs[i].chosen);
      CHECK(again.pairs[i].rejected == r.pairs[i].rejected);
    }
  }
}

TEST_CASE("build_pairs in gold-judge mode is antisymmetric in candidate order") {
  const ModelDims dims{24, 8, 4};
  const ModelParams policy = tiny_model(209, dims.vocab, dims.hidden, dims.modal).params;
  const std::vector<SyntheticTask> tasks = gen_tasks(30, TaskMix{1, 1, 0, 1}, 4, 210);
  DecodeConfig decode;
  decode.max_len = 6;

  const BuildPairsResult r = build_pairs(policy, tasks, 4, JudgeKind::gold_reward, decode, 211);
  CHECK(!r.pairs.empty());
  std::map<std::uint64_t, const SyntheticTask*> by_id;
  for (const SyntheticTask& t : tasks) by_id[t.id] = &t;
  for (const PreferencePair& p : r.pairs) {
    const SyntheticTask& task = *by_id.at(p.id);
    const GoldReward gold(task.gold_fn_id, dims.vocab);
    // chosen strictly outranks rejected under the hidden judge
    CHECK(gold.judge_score(task, p.chosen) > gold.judge_score(task, p.rejected));
    CHECK(p.source_tag == SourceTag::judge);
  }
}

TEST_CASE("make_gold_pairs") {
  const std::vector<SyntheticTask> tasks = gen_tasks(50, TaskMix{1, 1, 1, 0.5}, 8, 212);
  const BuildPairsResult r = make_gold_pairs(tasks, {}, 213);
  std::map<std::uint64_t, const SyntheticTask*> by_id;
  for (const SyntheticTask& t : tasks) by_id[t.id] = &t;
  for (const PreferencePair& p : r.pairs) {
    CHECK(verify(*by_id.at(p.id), p.chosen));
    CHECK_FALSE(verify(*by_id.at(p.id), p.rejected));
    CHECK(p.source_tag == SourceTag::synthetic_gold);
  }

  SUBCASE("padding inflates chosen lengths without breaking verification") {
    GoldPairOptions opts;
    opts.chosen_pad_max = 6;
    const BuildPairsResult padded = make_gold_pairs(tasks, opts, 213);
    bool any_longer = false;
    for (std::size_t i = 0; i < padded.pairs.size(); ++i) {
      CHECK(verify(*by_id.at(padded.pairs[i].id), padded.pairs[i].chosen));
      if (padded.pairs[i].chosen.size() > r.pairs[i].chosen.size()) any_longer = true;
    }
    CHECK(any_longer);
  }
}

TEST_CASE("length_filter") {
  auto pair_with_lengths = [](std::size_t chosen_len, std::size_t rejected_len) {
    PreferencePair p;
    p.prompt = {1};
    p.chosen.assign(chosen_len, 5);
    p.rejected.assign(rejected_len, 6);
    return p;
  };

  SUBCASE("chosen 400 vs rejected 100 at ratio 2 is removed") {
    const LengthFilterResult r = length_filter({pair_with_lengths(400, 100)}, 2.0);
    CHECK(r.kept.empty());
    CHECK(r.removed.size() == 1);
  }
  SUBCASE("equal lengths always kept; rejected-longer always kept") {
    const LengthFilterResult r =
        length_filter({pair_with_lengths(10, 10), pair_with_lengths(10, 400)}, 0.5);
    // equal lengths: ratio 1 > 0.5 removes it under this tiny ratio_max
    CHECK(r.kept.size() == 1);
    const LengthFilterResult r2 =
        length_filter({pair_with_lengths(10, 10), pair_with_lengths(10, 400)}, 1.0);
    CHECK(r2.kept.size() == 2);
  }
  SUBCASE("partition is order-preserving and complete") {
    Rng rng(214);
    std::vector<PreferencePair> pairs;
    for (std::uint64_t i = 0; i < 50; ++i) {
      PreferencePair p = pair_with_lengths(static_cast<std::size_t>(rng.uniform_int(1, 20)),
                                           static_cast<std::size_t>(rng.uniform_int(1, 20)));
      p.id = i;
      pairs.push_back(p);
    }
    const LengthFilterResult r = length_filter(pairs, 1.5);
    CHECK(r.kept.size() + r.removed.size() == pairs.size());
    for (std::size_t i = 1; i < r.kept.size(); ++i) CHECK(r.kept[i - 1].id < r.kept[i].id);
    for (std::size_t i = 1; i < r.removed.size(); ++i)
      CHECK(r.removed[i - 1].id < r.removed[i].id);
  }
  SUBCASE("idempotent on kept output") {
    Rng rng(215);
    std::vector<PreferencePair> pairs;
    for (int i = 0; i < 50; ++i)
      pairs.push_back(pair_with_lengths(static_cast<std::size_t>(rng.uniform_int(1, 20)),
                                        static_cast<std::size_t>(rng.uniform_int(1, 20))));
    const LengthFilterResult once = length_filter(pairs, 1.5);
    const LengthFilterResult twice = length_filter(once.kept, 1.5);
    CHECK(twice.removed.empty());
    CHECK(twice.kept.size() == once.kept.size());
  }
}

TEST_CASE("clean_dataset thresholds") {
  const ModelDims dims{24, 8, 4};
  const ModelParams rm = tiny_model(216, dims.vocab, dims.hidden, dims.modal).params;

  std::vector<CleanSample> samples;
  Rng rng(217);
  for (std::uint64_t i = 0; i < 100; ++i) {
    CleanSample s;
    s.id = i;
    s.prompt = random_tokens(rng, 3, dims.vocab);
    s.answer = random_tokens(rng, 4, dims.vocab);
    samples.push_back(std::move(s));
  }

  SUBCASE("percentile 5 on 100 distinct scores flags exactly 5") {
    const CleaningReport r = clean_dataset(rm, samples, CleanThreshold::percentile(5.0));
    CHECK(r.flagged_ids.size() == 5);
    // flagged are exactly the five smallest scores
    std::vector<double> sorted = r.scores;
    std::sort(sorted.begin(), sorted.end());
    for (std::uint64_t id : r.flagged_ids) {
      const double s = r.scores[static_cast<std::size_t>(id)];
      CHECK(s < sorted[5]);
    }
  }
  SUBCASE("threshold at -infinity flags nothing") {
    const CleaningReport r = clean_dataset(rm, samples, CleanThreshold::absolute(-1e308));
    CHECK(r.flagged_ids.empty());
  }
  SUBCASE("empty answers sort below everything and get flagged first") {
    auto with_empty = samples;
    with_empty[17].answer.clear();
    const CleaningReport r = clean_dataset(rm, with_empty, CleanThreshold::percentile(1.0));
    REQUIRE(r.flagged_ids.size() == 1);
    CHECK(r.flagged_ids[0] == 17);
  }
  SUBCASE("flags are a deterministic function of inputs") {
    const CleaningReport a = clean_dataset(rm, samples, CleanThreshold::percentile(10.0));
    const CleaningReport b = clean_dataset(rm, samples, CleanThreshold::percentile(10.0));
    CHECK(a.flagged_ids == b.flagged_ids);
    CHECK(a.scores == b.scores);
  }
  SUBCASE("summary percentiles are ordered") {
    const CleaningReport r = clean_dataset(rm, samples, CleanThreshold::percentile(5.0));
    CHECK(r.summary.min <= r.summary.p5);
    CHECK(r.summary.p5 <= r.summary.p25);
    CHECK(r.summary.p25 <= r.summary.median);
    CHECK(r.summary.median <= r.summary.p75);
    CHECK(r.summary.p75 <= r.summary.p95);
    CHECK(r.summary.p95 <= r.summary.max);
  }
  SUBCASE("empty input errors") {
    CHECK_THROWS_AS(clean_dataset(rm, {}, CleanThreshold::percentile(5.0)), Error);
  }
}

TEST_CASE("make_clean_corpus marks the corrupted identities") {
  const std::vector<SyntheticTask> tasks = gen_tasks(120, TaskMix{1, 1, 1, 0}, 8, 218);
  const CorruptCorpus corpus = make_clean_corpus(tasks, 0.05, 219);
  CHECK(corpus.corrupt_ids.size() ==
        static_cast<std::size_t>(0.05 * static_cast<double>(corpus.samples.size())));
  std::map<std::uint64_t, const SyntheticTask*> by_id;
  for (const SyntheticTask& t : tasks) by_id[t.id] = &t;
  const std::set<std::uint64_t> corrupt(corpus.corrupt_ids.begin(), corpus.corrupt_ids.end());
  for (const CleanSample& s : corpus.samples) {
    if (corrupt.count(s.id)) continue;
    CHECK(verify(*by_id.at(s.id), s.answer));
  }
}

TEST_CASE("sft_pretrain fits the demonstration distribution") {
  const ModelDims dims{24, 16, 4};
  const std::vector<SyntheticTask> tasks = gen_tasks(40, TaskMix{1, 0, 0, 0}, 4, 220);
  const ModelParams init = init_model_params(dims, 221);

  SftConfig cfg;
  cfg.steps = 60;
  cfg.lr = 5e-3;
  cfg.batch_size = 8;
  cfg.corrupt_prob = 0.0;
  const ModelParams fit = sft_pretrain(init, tasks, cfg, 222);

  double before = 0.0, after = 0.0;
  for (const SyntheticTask& t : tasks) {
    const SequenceSample demo{t.prompt, gold_response(t), t.modal};
    for (double lp : policy_logprobs(init, demo)) before += lp;
    for (double lp : policy_logprobs(fit, demo)) after += lp;
  }
  CHECK(after > before);
  CHECK(bitwise_equal(fit.tensor("modal_encoder"), init.tensor("modal_encoder")));

  // determinism
  const ModelParams fit2 = sft_pretrain(init, tasks, cfg, 222);
  CHECK(bitwise_equal(fit, fit2));
}

TEST_CASE("to_prompt_cases wires the normalized gold evaluator") {
  const std::vector<SyntheticTask> tasks = gen_tasks(20, TaskMix{1, 1, 0, 0}, 4, 223);
  const std::vector<PromptCase> cases = to_prompt_cases(tasks, 24);
  REQUIRE(cases.size() == tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    CHECK(cases[i].prompt == tasks[i].prompt);
    REQUIRE(static_cast<bool>(cases[i].gold_reward));
    CHECK(cases[i].gold_reward(gold_response(tasks[i])) == 1.0);
  }
}
