#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "prefrl/datapipe.hpp"
#include "prefrl/evalbench.hpp"
#include "support/gradcheck.hpp"

using namespace prefrl;
using namespace prefrl::testing;

namespace {

// Pairs whose correctness is controlled by content: chosen carrying the
// marker token scores 1, everything else 0.
constexpr Token kMarker = 9;

PreferencePair controlled_pair(std::uint64_t id, bool correct) {
  PreferencePair p;
  p.id = id;
  p.prompt = {1};
  p.chosen = correct ? std::vector<Token>{kMarker, 0} : std::vector<Token>{2, 0};
  p.rejected = {3, 0};
  return p;
}

PairScorer marker_scorer() {
  return [](const SequenceSample& s) {
    for (Token t : s.response)
      if (t == kMarker) return 1.0;
    return 0.0;
  };
}

std::vector<PreferencePair> category_with_accuracy(std::size_t total, std::size_t correct,
                                                   std::uint64_t id_base) {
  std::vector<PreferencePair> pairs;
  for (std::size_t i = 0; i < total; ++i)
    pairs.push_back(controlled_pair(id_base + i, i < correct));
  return pairs;
}

// counting oracle, independent of evaluate_rm
struct Counted {
  std::size_t correct = 0, total = 0;
};
Counted count_category(const PairScorer& scorer, const std::vector<PreferencePair>& pairs) {
  Counted c;
  for (const PreferencePair& p : pairs) {
    const double rw = scorer(SequenceSample{p.prompt, p.chosen, p.modal});
    const double rl = scorer(SequenceSample{p.prompt, p.rejected, p.modal});
    if (rw > rl) ++c.correct;
    ++c.total;
  }
  return c;
}

}  // namespace

TEST_CASE("macro accuracy reproduces the published headline aggregation") {
  // per-category accuracies 84.7 / 62.5 / 62.9 -> macro 70.0 at one decimal
  BenchmarkSet bench;
  bench.categories.emplace_back("general", category_with_accuracy(1000, 847, 0));
  bench.categories.emplace_back("hallucination", category_with_accuracy(1000, 625, 10000));
  bench.categories.emplace_back("reasoning", category_with_accuracy(1000, 629, 20000));

  const BenchReport report = evaluate_rm(marker_scorer(), bench);
  CHECK(report.categories[0].accuracy == doctest::Approx(0.847).epsilon(1e-12));
  CHECK(report.categories[1].accuracy == doctest::Approx(0.625).epsilon(1e-12));
  CHECK(report.categories[2].accuracy == doctest::Approx(0.629).epsilon(1e-12));
  CHECK(report.macro_acc == doctest::Approx((0.847 + 0.625 + 0.629) / 3.0).epsilon(1e-12));

  char rendered[16];
  std::snprintf(rendered, sizeof(rendered), "%.1f", 100.0 * report.macro_acc);
  CHECK(std::string(rendered) == "70.0");
}

TEST_CASE("overall vs macro on skewed categories, against the counting oracle") {
  BenchmarkSet bench;
  bench.categories.emplace_back("small_perfect", category_with_accuracy(10, 10, 0));
  bench.categories.emplace_back("large_zero", category_with_accuracy(90, 0, 1000));

  const BenchReport report = evaluate_rm(marker_scorer(), bench);
  CHECK(report.overall_acc == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(report.macro_acc == doctest::Approx(0.5).epsilon(1e-12));

  std::size_t correct = 0, total = 0;
  double macro = 0.0;
  for (const auto& [name, pairs] : bench.categories) {
    const Counted c = count_category(marker_scorer(), pairs);
    correct += c.correct;
    total += c.total;
    macro += static_cast<double>(c.correct) / static_cast<double>(c.total);
  }
  CHECK(report.overall_acc ==
        doctest::Approx(static_cast<double>(correct) / static_cast<double>(total)));
  CHECK(report.macro_acc == doctest::Approx(macro / 2.0));
}

TEST_CASE("single category: overall equals macro") {
  BenchmarkSet bench;
  bench.categories.emplace_back("only", category_with_accuracy(40, 27, 0));
  const BenchReport report = evaluate_rm(marker_scorer(), bench);
  CHECK(report.overall_acc == report.macro_acc);
}

TEST_CASE("benchmark validation") {
  BenchmarkSet empty_cat;
  empty_cat.categories.emplace_back("a", std::vector<PreferencePair>{});
  CHECK_THROWS_WITH_AS(validate_benchmark(empty_cat), doctest::Contains("empty category"), Error);

  BenchmarkSet dup;
  dup.categories.emplace_back("a", category_with_accuracy(2, 1, 0));
  dup.categories.emplace_back("a", category_with_accuracy(2, 1, 10));
  CHECK_THROWS_WITH_AS(validate_benchmark(dup), doctest::Contains("duplicate"), Error);

  CHECK_THROWS_AS(evaluate_rm(marker_scorer(), BenchmarkSet{}), Error);
}

TEST_CASE("evaluate_rm uses reward_score outputs exactly and is deterministic") {
  const ModelDims dims{24, 8, 4};
  const ModelParams rm = tiny_model(301, dims.vocab, dims.hidden, dims.modal).params;
  const std::vector<SyntheticTask> tasks = gen_tasks(30, TaskMix{1, 1, 0, 0}, 4, 302);
  const BuildPairsResult gold = make_gold_pairs(tasks, {}, 303);

  BenchmarkSet bench;
  bench.categories.emplace_back("all", gold.pairs);
  const BenchReport a = evaluate_rm(rm, bench);
  const BenchReport b = evaluate_rm(rm, bench);
  CHECK(a.overall_acc == b.overall_acc);

  // per-pair decisions equal direct reward_score comparisons
  std::size_t correct = 0;
  for (const PreferencePair& p : gold.pairs) {
    const double rw = reward_score(rm, SequenceSample{p.prompt, p.chosen, p.modal});
    const double rl = reward_score(rm, SequenceSample{p.prompt, p.rejected, p.modal});
    if (rw > rl) ++correct;
  }
  CHECK(a.total_correct == correct);
}

TEST_CASE("length_bias_probe") {
  const ModelDims dims{24, 8, 4};
  const ModelParams rm = tiny_model(304, dims.vocab, dims.hidden, dims.modal).params;
  const std::vector<SyntheticTask> tasks = gen_tasks(25, TaskMix{1, 1, 0, 0}, 4, 305);
  const BuildPairsResult gold = make_gold_pairs(tasks, {}, 306);

  SUBCASE("zero padding gives exactly zero delta and no flips") {
    const LengthBiasReport r = length_bias_probe(rm, gold.pairs, 0, tokens::kFiller);
    CHECK(r.mean_delta == 0.0);
    CHECK(r.flip_fraction == 0.0);
  }
  SUBCASE("flip fraction stays within [0, 1] and padding changes scores") {
    const LengthBiasReport r = length_bias_probe(rm, gold.pairs, 8, tokens::kFiller);
    CHECK(r.flip_fraction >= 0.0);
    CHECK(r.flip_fraction <= 1.0);
    CHECK(r.mean_delta != 0.0);
    CHECK(r.pairs == gold.pairs.size());
  }
  SUBCASE("empty pair list errors") {
    CHECK_THROWS_AS(length_bias_probe(rm, {}, 4, tokens::kFiller), Error);
  }
}

TEST_CASE("table rendering is aligned and complete") {
  BenchmarkSet bench;
  bench.categories.emplace_back("general", category_with_accuracy(10, 7, 0));
  bench.categories.emplace_back("reasoning", category_with_accuracy(10, 3, 100));
  const BenchReport report = evaluate_rm(marker_scorer(), bench);
  const std::string table = render_bench_table(report);
  CHECK(table.find("general") != std::string::npos);
  CHECK(table.find("reasoning") != std::string::npos);
  CHECK(table.find("overall") != std::string::npos);
  CHECK(table.find("macro") != std::string::npos);
}
