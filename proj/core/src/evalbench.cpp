#include "prefrl/evalbench.hpp"

#include <cmath>
#include <cstdio>
#include <set>

#include "prefrl/parallel.hpp"

namespace prefrl {

void validate_benchmark(const BenchmarkSet& bench) {
  require(!bench.categories.empty(), "benchmark: no categories");
  std::set<std::string> names;
  for (const auto& [name, pairs] : bench.categories) {
    require(!name.empty(), "benchmark: empty category name");
    require(names.insert(name).second, "benchmark: duplicate category '" + name + "'");
    require(!pairs.empty(), "benchmark: empty category '" + name + "'");
  }
}

BenchReport evaluate_rm(const PairScorer& scorer, const BenchmarkSet& bench) {
  validate_benchmark(bench);

  BenchReport report;
  double macro_sum = 0.0;
  for (const auto& [name, pairs] : bench.categories) {
    std::vector<int> correct(pairs.size(), 0);
    parallel_for(pairs.size(), [&, &pairs = pairs](std::size_t i) {
      const PreferencePair& p = pairs[i];
      const double rw = scorer(SequenceSample{p.prompt, p.chosen, p.modal});
      const double rl = scorer(SequenceSample{p.prompt, p.rejected, p.modal});
      correct[i] = rw > rl ? 1 : 0;  // ties incorrect
    });

    CategoryResult cat;
    cat.name = name;
    cat.pairs = pairs.size();
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      cat.correct += static_cast<std::size_t>(correct[i]);
      cat.mean_chosen_len += static_cast<double>(pairs[i].chosen.size());
      cat.mean_rejected_len += static_cast<double>(pairs[i].rejected.size());
    }
    cat.accuracy = static_cast<double>(cat.correct) / static_cast<double>(cat.pairs);
    cat.mean_chosen_len /= static_cast<double>(cat.pairs);
    cat.mean_rejected_len /= static_cast<double>(cat.pairs);

    report.total_pairs += cat.pairs;
    report.total_correct += cat.correct;
    macro_sum += cat.accuracy;
    report.categories.push_back(std::move(cat));
  }
  report.overall_acc =
      static_cast<double>(report.total_correct) / static_cast<double>(report.total_pairs);
  report.macro_acc = macro_sum / static_cast<double>(report.categories.size());
  return report;
}

BenchReport evaluate_rm(const ModelParams& rm, const BenchmarkSet& bench,
                        const ScoreOptions& opts) {
  return evaluate_rm(make_rm_scorer(rm, opts), bench);
}

LengthBiasReport length_bias_probe(const ModelParams& rm, const std::vector<PreferencePair>& pairs,
                                   std::size_t padding, Token filler_token,
                                   const ScoreOptions& opts) {
  require(!pairs.empty(), "length_bias_probe: empty pair list");

  LengthBiasReport report;
  report.padding = padding;
  report.pairs = pairs.size();

  std::vector<double> deltas(pairs.size(), 0.0);
  std::vector<int> flips(pairs.size(), 0);
  parallel_for(pairs.size(), [&](std::size_t i) {
    const PreferencePair& p = pairs[i];
    const SequenceSample chosen{p.prompt, p.chosen, p.modal};
    std::vector<Token> padded_tokens = p.chosen;
    padded_tokens.insert(padded_tokens.end(), padding, filler_token);
    const SequenceSample padded{p.prompt, padded_tokens, p.modal};

    const double original = reward_score(rm, chosen, opts);
    const double shifted = padding == 0 ? original : reward_score(rm, padded, opts);
    const double rl = reward_score(rm, SequenceSample{p.prompt, p.rejected, p.modal}, opts);

    deltas[i] = shifted - original;
    flips[i] = (original > rl) != (shifted > rl) ? 1 : 0;
  });

  for (std::size_t i = 0; i < pairs.size(); ++i) {
    report.mean_delta += deltas[i];
    report.flip_fraction += flips[i];
  }
  report.mean_delta /= static_cast<double>(pairs.size());
  report.flip_fraction /= static_cast<double>(pairs.size());
  return report;
}

std::string render_bench_table(const BenchReport& report) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-24s %8s %9s %12s %14s\n", "category", "pairs", "acc",
                "chosen_len", "rejected_len");
  out += line;
  for (const CategoryResult& cat : report.categories) {
    std::snprintf(line, sizeof(line), "%-24s %8zu %9.4f %12.2f %14.2f\n", cat.name.c_str(),
                  cat.pairs, cat.accuracy, cat.mean_chosen_len, cat.mean_rejected_len);
    out += line;
  }
  std::snprintf(line, sizeof(line), "%-24s %8zu %9.4f\n", "overall", report.total_pairs,
                report.overall_acc);
  out += line;
  std::snprintf(line, sizeof(line), "%-24s %8s %9.4f\n", "macro", "", report.macro_acc);
  out += line;
  return out;
}

}  // namespace prefrl
