#include "prefrl/model.hpp"

#include <cmath>

#include "prefrl/rng.hpp"

namespace prefrl {

namespace {

Tensor uniform_init(std::vector<std::size_t> shape, double bound, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = rng.uniform(-bound, bound);
  return t;
}

constexpr const char* kGruGateNames[3][3] = {
    {"gru_wz", "gru_uz", "gru_bz"},
    {"gru_wr", "gru_ur", "gru_br"},
    {"gru_wh", "gru_uh", "gru_bh"},
};

}  // namespace

ModelParams init_model_params(const ModelDims& dims, std::uint64_t seed) {
  require(dims.vocab > 0 && dims.hidden > 0 && dims.modal > 0, "init: dims must be positive");
  const std::size_t v = dims.vocab, d = dims.hidden, m = dims.modal;
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  const double sm = 1.0 / std::sqrt(static_cast<double>(m));

  ModelParams p;
  auto put = [&](const std::string& name, Tensor t, bool trainable) {
    p.tensors[name] = Param{std::move(t), trainable};
  };

  auto stream = [&](const std::string& name) { return make_stream(seed, "init/" + name); };

  {
    Rng r = stream("embed");
    put("embed", uniform_init({v, d}, sd, r), true);
  }
  {
    Rng r = stream("modal_encoder");
    put("modal_encoder", uniform_init({m, m}, sm, r), false);
  }
  {
    Rng r = stream("modal_projector");
    put("modal_projector", uniform_init({m, d}, sm, r), false);
  }
  for (const auto& gate : kGruGateNames) {
    Rng rw = stream(gate[0]);
    put(gate[0], uniform_init({d, d}, sd, rw), true);
    Rng ru = stream(gate[1]);
    put(gate[1], uniform_init({d, d}, sd, ru), true);
    put(gate[2], Tensor::zeros({1, d}), true);
  }
  {
    Rng r = stream("lm_head");
    put("lm_head", uniform_init({d, v}, sd, r), true);
  }
  put("value_head", Tensor::zeros({d, 1}), true);
  put("score_head", Tensor::zeros({d, 1}), true);
  return p;
}

ModelDims model_dims(const ModelParams& params) {
  const Tensor& embed = params.tensor("embed");
  const Tensor& proj = params.tensor("modal_projector");
  require(embed.rank() == 2 && proj.rank() == 2, "params: malformed embed/projector shapes");
  return ModelDims{embed.shape[0], embed.shape[1], proj.shape[0]};
}

ModelParams make_critic_init(const ModelParams& reward_model) {
  ModelParams critic = reward_model;
  critic.tensors.at("value_head").value = reward_model.tensor("score_head");
  return critic;
}

ModelGraph::ModelGraph(Tape& tape, const ModelParams& params) : tape_(&tape) {
  dims_ = model_dims(params);
  for (const auto& [name, param] : params.tensors)
    leaves_[name] = tape_->leaf(name, param.value, param.trainable);
}

Var ModelGraph::initial_hidden() const {
  return tape_->constant(Tensor::zeros({1, dims_.hidden}));
}

Var ModelGraph::embed_token(Token t) const {
  require(t >= 0 && static_cast<std::size_t>(t) < dims_.vocab,
          "embed: token id " + std::to_string(t) + " outside vocabulary of " +
              std::to_string(dims_.vocab));
  return tape_->gather_rows(leaves_.at("embed"), {static_cast<std::size_t>(t)});
}

Var ModelGraph::modal_prefix(const ModalContext& modal) const {
  require(modal.observation.size() == dims_.modal,
          "modal: observation length " + std::to_string(modal.observation.size()) +
              " does not match projector input " + std::to_string(dims_.modal));
  Var obs = tape_->constant(Tensor::matrix(1, dims_.modal, modal.observation));
  Var enc = tape_->tanh(tape_->matmul(obs, leaves_.at("modal_encoder")));
  return tape_->matmul(enc, leaves_.at("modal_projector"));
}

Var ModelGraph::step(Var h_prev, Var x) const {
  Tape& t = *tape_;
  Var z = t.sigmoid(t.add(t.add(t.matmul(x, leaves_.at("gru_wz")), t.matmul(h_prev, leaves_.at("gru_uz"))),
                          leaves_.at("gru_bz")));
  Var r = t.sigmoid(t.add(t.add(t.matmul(x, leaves_.at("gru_wr")), t.matmul(h_prev, leaves_.at("gru_ur"))),
                          leaves_.at("gru_br")));
  Var cand = t.tanh(t.add(t.add(t.matmul(x, leaves_.at("gru_wh")),
                                t.matmul(t.mul(r, h_prev), leaves_.at("gru_uh"))),
                          leaves_.at("gru_bh")));
  Var keep = t.sub(t.constant(Tensor::scalar(1.0)), z);
  return t.add(t.mul(keep, h_prev), t.mul(z, cand));
}

Var ModelGraph::lm_logits(Var h) const { return tape_->matmul(h, leaves_.at("lm_head")); }

std::vector<Var> ModelGraph::input_embeddings(const SequenceSample& sample) const {
  std::vector<Var> xs;
  xs.reserve(encoded_length(sample));
  if (sample.modal) xs.push_back(modal_prefix(*sample.modal));
  for (Token t : sample.prompt) xs.push_back(embed_token(t));
  for (Token t : sample.response) xs.push_back(embed_token(t));
  return xs;
}

std::vector<Var> ModelGraph::hidden_states(const SequenceSample& sample) const {
  std::vector<Var> hs;
  Var h = initial_hidden();
  for (Var x : input_embeddings(sample)) {
    h = step(h, x);
    hs.push_back(h);
  }
  return hs;
}

Var ModelGraph::head_over_pool(const std::vector<Var>& hidden, std::size_t upto,
                               std::size_t pool_start, const char* head_name) const {
  require(pool_start <= upto && upto < hidden.size(), "pool: empty pooling window");
  Var s = hidden[pool_start];
  for (std::size_t k = pool_start + 1; k <= upto; ++k) s = tape_->add(s, hidden[k]);
  Var pooled = tape_->scale(s, 1.0 / static_cast<double>(upto - pool_start + 1));
  return tape_->matmul(pooled, leaves_.at(head_name));
}

Var ModelGraph::reward_score(const SequenceSample& sample, const ScoreOptions& opts) const {
  require(!sample.response.empty(), "reward_score: empty response, nothing to score");
  const std::vector<Var> hidden = hidden_states(sample);
  const std::size_t pool_start =
      opts.response_only_pooling ? (sample.modal ? 1 : 0) + sample.prompt.size() : 0;
  return head_over_pool(hidden, hidden.size() - 1, pool_start, "score_head");
}

std::vector<Var> ModelGraph::truncated_scores(const SequenceSample& sample,
                                              const ScoreOptions& opts) const {
  require(!sample.response.empty(), "truncated_scores: empty response");
  const std::vector<Var> hidden = hidden_states(sample);
  const std::size_t t_pre = (sample.modal ? 1 : 0) + sample.prompt.size();
  const std::size_t pool_start = opts.response_only_pooling ? t_pre : 0;

  std::vector<Var> scores;
  scores.reserve(sample.response.size());
  // Incremental running sum; the chain at each cut matches what a separate
  // call on the truncated sequence would compute.
  Var s = hidden[pool_start];
  for (std::size_t k = pool_start + 1; k <= t_pre; ++k) s = tape_->add(s, hidden[k]);
  for (std::size_t i = 0; i < sample.response.size(); ++i) {
    const std::size_t k = t_pre + i;
    if (k > pool_start && k > t_pre) s = tape_->add(s, hidden[k]);
    Var pooled = tape_->scale(s, 1.0 / static_cast<double>(k - pool_start + 1));
    scores.push_back(tape_->matmul(pooled, leaves_.at("score_head")));
  }
  return scores;
}

Var ModelGraph::response_logprobs(const SequenceSample& sample) const {
  require(!sample.response.empty(), "response_logprobs: empty response");
  const std::vector<Var> hidden = hidden_states(sample);
  const std::size_t t_pre = (sample.modal ? 1 : 0) + sample.prompt.size();

  std::vector<Var> lps;
  lps.reserve(sample.response.size());
  for (std::size_t i = 0; i < sample.response.size(); ++i) {
    const std::size_t pos = t_pre + i;
    Var h_prev = pos == 0 ? initial_hidden() : hidden[pos - 1];
    Var row = tape_->log(tape_->softmax(lm_logits(h_prev)));
    const Token tok = sample.response[i];
    require(tok >= 0 && static_cast<std::size_t>(tok) < dims_.vocab,
            "response_logprobs: token id outside vocabulary");
    lps.push_back(tape_->gather(row, {static_cast<std::size_t>(tok)}));
  }
  return tape_->concat(lps);
}

Var ModelGraph::response_values(const SequenceSample& sample, const ScoreOptions& opts) const {
  require(!sample.response.empty(), "response_values: empty response");
  const std::vector<Var> hidden = hidden_states(sample);
  const std::size_t t_pre = (sample.modal ? 1 : 0) + sample.prompt.size();
  const std::size_t pool_start = opts.response_only_pooling ? t_pre : 0;

  std::vector<Var> vals;
  vals.reserve(sample.response.size());
  Var s = hidden[pool_start];
  for (std::size_t k = pool_start + 1; k <= t_pre; ++k) s = tape_->add(s, hidden[k]);
  for (std::size_t i = 0; i < sample.response.size(); ++i) {
    const std::size_t k = t_pre + i;
    if (k > pool_start && k > t_pre) s = tape_->add(s, hidden[k]);
    Var pooled = tape_->scale(s, 1.0 / static_cast<double>(k - pool_start + 1));
    vals.push_back(tape_->flatten(tape_->matmul(pooled, leaves_.at("value_head"))));
  }
  return tape_->concat(vals);
}

std::size_t encoded_length(const SequenceSample& sample) {
  return (sample.modal ? 1 : 0) + sample.prompt.size() + sample.response.size();
}

std::vector<std::vector<double>> encode(const ModelParams& params, const SequenceSample& sample) {
  Tape tape(false);
  ModelGraph graph(tape, params);
  std::vector<std::vector<double>> out;
  for (Var h : graph.hidden_states(sample)) out.push_back(tape.value(h).data);
  return out;
}

double reward_score(const ModelParams& params, const SequenceSample& sample,
                    const ScoreOptions& opts) {
  Tape tape(false);
  ModelGraph graph(tape, params);
  return tape.value(graph.reward_score(sample, opts)).value();
}

std::vector<double> policy_logprobs(const ModelParams& params, const SequenceSample& sample) {
  Tape tape(false);
  ModelGraph graph(tape, params);
  return tape.value(graph.response_logprobs(sample)).data;
}

std::vector<double> value_estimates(const ModelParams& params, const SequenceSample& sample,
                                    const ScoreOptions& opts) {
  Tape tape(false);
  ModelGraph graph(tape, params);
  return tape.value(graph.response_values(sample, opts)).data;
}

SequenceEncoder::SequenceEncoder(const ModelParams& params, const std::vector<Token>& prompt,
                                 const std::optional<ModalContext>& modal)
    : tape_(std::make_unique<Tape>(false)), graph_(std::make_unique<ModelGraph>(*tape_, params)) {
  h_ = graph_->initial_hidden();
  if (modal) {
    h_ = graph_->step(h_, graph_->modal_prefix(*modal));
    ++consumed_;
  }
  for (Token t : prompt) push(t);
}

SequenceEncoder::~SequenceEncoder() = default;

void SequenceEncoder::push(Token t) {
  h_ = graph_->step(h_, graph_->embed_token(t));
  ++consumed_;
}

std::vector<double> SequenceEncoder::next_logits() const {
  Var h = consumed_ == 0 ? graph_->initial_hidden() : h_;
  return tape_->value(graph_->lm_logits(h)).data;
}

std::vector<double> SequenceEncoder::next_logprobs() const {
  Var h = consumed_ == 0 ? graph_->initial_hidden() : h_;
  return tape_->value(tape_->log(tape_->softmax(graph_->lm_logits(h)))).data;
}

}  // namespace prefrl
