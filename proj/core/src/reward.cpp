#include "prefrl/reward.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "prefrl/datapipe.hpp"
#include "prefrl/optim.hpp"
#include "prefrl/parallel.hpp"
#include "prefrl/rng.hpp"

namespace prefrl {

std::string to_string(DomainTag t) {
  switch (t) {
    case DomainTag::general: return "general";
    case DomainTag::text_rich: return "text_rich";
    case DomainTag::reasoning: return "reasoning";
    case DomainTag::instruction_following: return "instruction_following";
    case DomainTag::video_surrogate: return "video_surrogate";
  }
  fail("domain_tag: bad enum value");
}

std::string to_string(SourceTag t) {
  switch (t) {
    case SourceTag::judge: return "judge";
    case SourceTag::verifier: return "verifier";
    case SourceTag::synthetic_gold: return "synthetic_gold";
  }
  fail("source_tag: bad enum value");
}

DomainTag domain_tag_from_string(const std::string& s) {
  if (s == "general") return DomainTag::general;
  if (s == "text_rich") return DomainTag::text_rich;
  if (s == "reasoning") return DomainTag::reasoning;
  if (s == "instruction_following") return DomainTag::instruction_following;
  if (s == "video_surrogate") return DomainTag::video_surrogate;
  fail("domain_tag: unknown value '" + s + "'");
}

SourceTag source_tag_from_string(const std::string& s) {
  if (s == "judge") return SourceTag::judge;
  if (s == "verifier") return SourceTag::verifier;
  if (s == "synthetic_gold") return SourceTag::synthetic_gold;
  fail("source_tag: unknown value '" + s + "'");
}

void validate_pair(const PreferencePair& pair) {
  require(!pair.chosen.empty() && !pair.rejected.empty(),
          "pair " + std::to_string(pair.id) + ": responses must be non-empty");
  require(pair.chosen != pair.rejected,
          "pair " + std::to_string(pair.id) + ": chosen equals rejected");
}

double bt_loss(double r_w, double r_l) {
  require(std::isfinite(r_w) && std::isfinite(r_l), "bt_loss: non-finite reward input");
  // exact softplus(-m): strictly positive for every finite margin, where the
  // -log(sigmoid(m)) composition would round to 0 past m ~ 36
  const double m = r_w - r_l;
  return m >= 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

Var bt_loss_var(Tape& tape, Var r_w, Var r_l) {
  return tape.scale(tape.log(tape.sigmoid(tape.sub(r_w, r_l))), -1.0);
}

PairScorer make_rm_scorer(const ModelParams& params, const ScoreOptions& opts) {
  // By-value copy so the scorer is safe to fan out across workers.
  auto shared = std::make_shared<ModelParams>(params);
  return [shared, opts](const SequenceSample& sample) {
    return reward_score(*shared, sample, opts);
  };
}

double pairwise_accuracy(const PairScorer& scorer, const std::vector<PreferencePair>& pairs) {
  require(!pairs.empty(), "pairwise_accuracy: empty pair list");
  std::vector<int> correct(pairs.size(), 0);
  parallel_for(pairs.size(), [&](std::size_t i) {
    const PreferencePair& p = pairs[i];
    const double rw = scorer(SequenceSample{p.prompt, p.chosen, p.modal});
    const double rl = scorer(SequenceSample{p.prompt, p.rejected, p.modal});
    correct[i] = rw > rl ? 1 : 0;
  });
  const int total = std::accumulate(correct.begin(), correct.end(), 0);
  return static_cast<double>(total) / static_cast<double>(pairs.size());
}

double pairwise_accuracy(const ModelParams& params, const std::vector<PreferencePair>& pairs,
                         const ScoreOptions& opts) {
  return pairwise_accuracy(make_rm_scorer(params, opts), pairs);
}

RMTrainResult train_reward_model(const ModelParams& init, const std::vector<PreferencePair>& pairs,
                                 const RMTrainConfig& cfg, std::uint64_t seed,
                                 const ScoreOptions& opts) {
  require(cfg.eval_fraction > 0.0 && cfg.eval_fraction < 1.0,
          "train_reward_model: eval_fraction must be in (0, 1)");

  std::vector<PreferencePair> usable = pairs;
  std::size_t filtered_out = 0;
  if (cfg.length_ratio_max) {
    LengthFilterResult filtered = length_filter(usable, *cfg.length_ratio_max);
    filtered_out = filtered.removed.size();
    usable = std::move(filtered.kept);
  }
  require(usable.size() >= 2,
          "train_reward_model: fewer than 2 pairs remain after the length filter (removed " +
              std::to_string(filtered_out) + ")");
  for (const PreferencePair& p : usable) validate_pair(p);

  // Deterministic held-out split.
  std::vector<std::size_t> order(usable.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng = make_stream(seed, "rm/split");
  split_rng.shuffle(order);
  std::size_t heldout_n = static_cast<std::size_t>(
      std::floor(cfg.eval_fraction * static_cast<double>(usable.size())));
  heldout_n = std::max<std::size_t>(1, std::min(heldout_n, usable.size() - 1));

  std::vector<PreferencePair> heldout, train;
  heldout.reserve(heldout_n);
  train.reserve(usable.size() - heldout_n);
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < heldout_n ? heldout : train).push_back(usable[order[i]]);

  RMTrainResult result;
  result.params = init;
  result.pairs_filtered_out = filtered_out;
  result.train_pairs = train.size();
  result.heldout_pairs = heldout.size();

  AdamState adam;
  const std::size_t batch = std::max<std::size_t>(1, std::min(cfg.batch_size, train.size()));
  Rng batch_rng = make_stream(seed, "rm/batches");

  double last_acc = 0.0;
  bool have_acc = false;
  for (std::size_t step = 1; step <= cfg.max_steps; ++step) {
    Tape tape;
    ModelGraph graph(tape, result.params);
    std::vector<Var> losses;
    losses.reserve(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      const PreferencePair& p =
          train[static_cast<std::size_t>(batch_rng.uniform_int(0, static_cast<std::int64_t>(train.size())))];
      Var rw = graph.reward_score(SequenceSample{p.prompt, p.chosen, p.modal}, opts);
      Var rl = graph.reward_score(SequenceSample{p.prompt, p.rejected, p.modal}, opts);
      losses.push_back(bt_loss_var(tape, rw, rl));
    }
    Var loss = tape.mean(tape.concat(losses));
    const double loss_value = tape.value(loss).value();
    GradMap grads = tape.backward(loss);
    // lr == 0 is a legal no-movement configuration; adam itself rejects it.
    if (cfg.lr != 0.0) adam.step(result.params, grads, cfg.lr);

    RMTrainLogEntry entry;
    entry.step = step;
    entry.loss = loss_value;
    entry.lr = cfg.lr;
    if (step % cfg.eval_every == 0 || step == cfg.max_steps) {
      last_acc = pairwise_accuracy(result.params, heldout, opts);
      have_acc = true;
      entry.heldout_acc = last_acc;
    }
    result.log.push_back(entry);

    if (entry.heldout_acc && cfg.early_stop_heldout_acc &&
        *entry.heldout_acc >= *cfg.early_stop_heldout_acc)
      break;
  }

  if (!have_acc) last_acc = pairwise_accuracy(result.params, heldout, opts);
  result.final_heldout_acc = last_acc;
  return result;
}

}  // namespace prefrl
