#include <benchmark/benchmark.h>

#include "prefrl/datapipe.hpp"
#include "prefrl/optim.hpp"
#include "prefrl/rl.hpp"
#include "prefrl/sampling.hpp"

namespace {

using namespace prefrl;

const ModelDims kDims{24, 48, 8};

const ModelParams& bench_params() {
  static const ModelParams params = init_model_params(kDims, 1234);
  return params;
}

SequenceSample bench_sample(std::size_t response_len) {
  Rng rng(99);
  SequenceSample s;
  s.prompt = {tokens::digit(3), tokens::kPlus, tokens::digit(4)};
  for (std::size_t i = 0; i < response_len; ++i)
    s.response.push_back(static_cast<Token>(rng.uniform_int(1, kDims.vocab)));
  return s;
}

void BM_MatmulForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(7);
  Tensor a = Tensor::zeros({n, n});
  Tensor b = Tensor::zeros({n, n});
  for (double& v : a.data) v = rng.uniform(-1, 1);
  for (double& v : b.data) v = rng.uniform(-1, 1);
  for (auto _ : state) {
    Tape t(false);
    benchmark::DoNotOptimize(t.value(t.matmul(t.constant(a), t.constant(b))).data.data());
  }
}
BENCHMARK(BM_MatmulForward)->Arg(16)->Arg(48)->Arg(96);

void BM_RewardScore(benchmark::State& state) {
  const SequenceSample s = bench_sample(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(reward_score(bench_params(), s));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_RewardScore)->Arg(4)->Arg(16)->Arg(64);

void BM_PairwiseGradientStep(benchmark::State& state) {
  const SequenceSample chosen = bench_sample(8);
  const SequenceSample rejected = bench_sample(6);
  ModelParams params = bench_params();
  AdamState adam;
  for (auto _ : state) {
    Tape tape;
    ModelGraph graph(tape, params);
    Var loss = bt_loss_var(tape, graph.reward_score(chosen), graph.reward_score(rejected));
    GradMap grads = tape.backward(loss);
    adam.step(params, grads, 1e-5);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_PairwiseGradientStep);

void BM_Gae(benchmark::State& state) {
  const auto t_len = static_cast<std::size_t>(state.range(0));
  Trajectory traj;
  traj.sample = bench_sample(t_len);
  traj.actions = traj.sample.response;
  Rng rng(5);
  for (std::size_t i = 0; i < t_len; ++i) {
    traj.logprobs_old.push_back(-rng.uniform(0.1, 2.0));
    traj.values.push_back(rng.uniform(-1, 1));
    traj.rewards.push_back(rng.uniform(-1, 1));
  }
  for (auto _ : state) benchmark::DoNotOptimize(gae(traj, 0.99, 0.95).advantage.data());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Gae)->Arg(8)->Arg(64)->Arg(512);

void BM_GenerateTokens(benchmark::State& state) {
  DecodeConfig decode;
  decode.max_len = static_cast<std::size_t>(state.range(0));
  decode.stop_token = -1;  // never stops; measures steady-state token rate
  const std::vector<Token> prompt = {tokens::digit(2), tokens::kTimes, tokens::digit(3)};
  std::uint64_t seed = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(generate(bench_params(), prompt, std::nullopt, decode, seed++));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GenerateTokens)->Arg(8)->Arg(32);

}  // namespace

BENCHMARK_MAIN();
