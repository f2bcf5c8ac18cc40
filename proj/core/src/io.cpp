#include "prefrl/io.hpp"

#include <fstream>
#include <map>

#include <json.hpp>

namespace prefrl {

namespace {

using nlohmann::json;

json meta_line(const FileMeta& meta) {
  return json{{"format", meta.format}, {"seed", meta.seed}, {"config_hash", meta.config_hash}};
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), "io: cannot open for writing: " + path.string());
  return out;
}

std::vector<json> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "io: missing or unreadable: " + path.string());
  std::vector<json> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      fail("io: " + path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    const bool is_header = j.contains("format") && !j.contains("prompt_tokens") &&
                           !j.contains("step") && !j.contains("update");
    if (is_header && line_no == 1) continue;
    records.push_back(std::move(j));
  }
  return records;
}

json tokens_json(const std::vector<Token>& tokens) {
  json arr = json::array();
  for (Token t : tokens) arr.push_back(t);
  return arr;
}

std::vector<Token> tokens_from(const json& arr, const std::string& what) {
  require(arr.is_array(), "io: " + what + " must be an array");
  std::vector<Token> out;
  out.reserve(arr.size());
  for (const auto& v : arr) out.push_back(v.get<Token>());
  return out;
}

void put_modal(json& j, const std::optional<ModalContext>& modal) {
  if (!modal) return;
  json arr = json::array();
  for (double v : modal->observation) arr.push_back(v);
  j["modal"] = std::move(arr);
}

std::optional<ModalContext> get_modal(const json& j) {
  if (!j.contains("modal") || j["modal"].is_null()) return std::nullopt;
  ModalContext m;
  for (const auto& v : j["modal"]) m.observation.push_back(v.get<double>());
  return m;
}

}  // namespace

void write_tasks(const std::filesystem::path& path, const std::vector<SyntheticTask>& tasks,
                 const FileMeta& meta) {
  std::ofstream out = open_out(path);
  out << meta_line(meta).dump() << "\n";
  for (const SyntheticTask& t : tasks) {
    json j{{"id", t.id},
           {"kind", to_string(t.kind)},
           {"prompt_tokens", tokens_json(t.prompt)},
           {"gold_fn_id", t.gold_fn_id}};
    put_modal(j, t.modal);
    if (!t.gold_answer.empty()) j["gold_answer"] = tokens_json(t.gold_answer);
    if (t.constraint)
      j["constraint"] = json{{"type", to_string(t.constraint->type)}, {"param", t.constraint->param}};
    out << j.dump() << "\n";
  }
  require(static_cast<bool>(out), "io: write failed: " + path.string());
}

std::vector<SyntheticTask> read_tasks(const std::filesystem::path& path) {
  std::vector<SyntheticTask> tasks;
  for (const json& j : read_records(path)) {
    SyntheticTask t;
    t.id = j.at("id").get<std::uint64_t>();
    t.kind = task_kind_from_string(j.at("kind").get<std::string>());
    t.prompt = tokens_from(j.at("prompt_tokens"), "prompt_tokens");
    t.gold_fn_id = j.at("gold_fn_id").get<std::uint64_t>();
    t.modal = get_modal(j);
    if (j.contains("gold_answer")) t.gold_answer = tokens_from(j["gold_answer"], "gold_answer");
    if (j.contains("constraint")) {
      Constraint c;
      c.type = constraint_type_from_string(j["constraint"].at("type").get<std::string>());
      c.param = j["constraint"].at("param").get<int>();
      t.constraint = c;
    }
    tasks.push_back(std::move(t));
  }
  return tasks;
}

void write_pairs(const std::filesystem::path& path, const std::vector<PreferencePair>& pairs,
                 const FileMeta& meta) {
  std::ofstream out = open_out(path);
  out << meta_line(meta).dump() << "\n";
  for (const PreferencePair& p : pairs) {
    json j{{"id", p.id},
           {"prompt_tokens", tokens_json(p.prompt)},
           {"chosen_tokens", tokens_json(p.chosen)},
           {"rejected_tokens", tokens_json(p.rejected)},
           {"domain_tag", to_string(p.domain_tag)},
           {"source_tag", to_string(p.source_tag)},
           {"category", to_string(p.domain_tag)}};
    put_modal(j, p.modal);
    out << j.dump() << "\n";
  }
  require(static_cast<bool>(out), "io: write failed: " + path.string());
}

namespace {

PreferencePair pair_from_json(const json& j) {
  PreferencePair p;
  p.id = j.at("id").get<std::uint64_t>();
  p.prompt = tokens_from(j.at("prompt_tokens"), "prompt_tokens");
  p.chosen = tokens_from(j.at("chosen_tokens"), "chosen_tokens");
  p.rejected = tokens_from(j.at("rejected_tokens"), "rejected_tokens");
  p.domain_tag = domain_tag_from_string(j.at("domain_tag").get<std::string>());
  p.source_tag = source_tag_from_string(j.at("source_tag").get<std::string>());
  p.modal = get_modal(j);
  validate_pair(p);
  return p;
}

}  // namespace

std::vector<PreferencePair> read_pairs(const std::filesystem::path& path) {
  std::vector<PreferencePair> pairs;
  for (const json& j : read_records(path)) pairs.push_back(pair_from_json(j));
  return pairs;
}

BenchmarkSet read_benchmark(const std::filesystem::path& path) {
  std::map<std::string, std::vector<PreferencePair>> grouped;
  std::vector<std::string> order;
  for (const json& j : read_records(path)) {
    require(j.contains("category"),
            "io: benchmark line without a category field in " + path.string());
    const std::string category = j["category"].get<std::string>();
    if (grouped.find(category) == grouped.end()) order.push_back(category);
    grouped[category].push_back(pair_from_json(j));
  }
  BenchmarkSet bench;
  for (const std::string& name : order)
    bench.categories.emplace_back(name, std::move(grouped[name]));
  validate_benchmark(bench);
  return bench;
}

void write_clean_samples(const std::filesystem::path& path,
                         const std::vector<CleanSample>& samples, const FileMeta& meta) {
  std::ofstream out = open_out(path);
  out << meta_line(meta).dump() << "\n";
  for (const CleanSample& s : samples) {
    json j{{"id", s.id},
           {"prompt_tokens", tokens_json(s.prompt)},
           {"answer_tokens", tokens_json(s.answer)}};
    put_modal(j, s.modal);
    out << j.dump() << "\n";
  }
  require(static_cast<bool>(out), "io: write failed: " + path.string());
}

std::vector<CleanSample> read_clean_samples(const std::filesystem::path& path) {
  std::vector<CleanSample> samples;
  for (const json& j : read_records(path)) {
    CleanSample s;
    s.id = j.at("id").get<std::uint64_t>();
    s.prompt = tokens_from(j.at("prompt_tokens"), "prompt_tokens");
    s.answer = tokens_from(j.at("answer_tokens"), "answer_tokens");
    s.modal = get_modal(j);
    samples.push_back(std::move(s));
  }
  return samples;
}

void write_rm_log(const std::filesystem::path& path, const std::vector<RMTrainLogEntry>& log,
                  const FileMeta& meta) {
  std::ofstream out = open_out(path);
  out << meta_line(meta).dump() << "\n";
  for (const RMTrainLogEntry& e : log) {
    json j{{"step", e.step}, {"loss", e.loss}, {"lr", e.lr}};
    if (e.heldout_acc) j["heldout_acc"] = *e.heldout_acc;
    out << j.dump() << "\n";
  }
  require(static_cast<bool>(out), "io: write failed: " + path.string());
}

void write_ppo_log(const std::filesystem::path& path, const std::vector<PPOLogEntry>& log,
                   const FileMeta& meta) {
  std::ofstream out = open_out(path);
  out << meta_line(meta).dump() << "\n";
  for (const PPOLogEntry& e : log) {
    json j{{"update", e.update},
           {"mean_reward_rm", e.mean_reward_rm},
           {"mean_kl", e.mean_kl},
           {"mean_len", e.mean_len},
           {"policy_loss", e.policy_loss},
           {"critic_loss", e.critic_loss}};
    if (e.mean_reward_gold) j["mean_reward_gold"] = *e.mean_reward_gold;
    out << j.dump() << "\n";
  }
  require(static_cast<bool>(out), "io: write failed: " + path.string());
}

std::vector<PPOLogEntry> read_ppo_log(const std::filesystem::path& path) {
  std::vector<PPOLogEntry> log;
  for (const json& j : read_records(path)) {
    PPOLogEntry e;
    e.update = j.at("update").get<std::size_t>();
    e.mean_reward_rm = j.at("mean_reward_rm").get<double>();
    e.mean_kl = j.at("mean_kl").get<double>();
    e.mean_len = j.at("mean_len").get<double>();
    e.policy_loss = j.at("policy_loss").get<double>();
    e.critic_loss = j.at("critic_loss").get<double>();
    if (j.contains("mean_reward_gold")) e.mean_reward_gold = j["mean_reward_gold"].get<double>();
    log.push_back(e);
  }
  return log;
}

void write_clean_report(const std::filesystem::path& path, const CleaningReport& report,
                        const FileMeta& meta) {
  json samples = json::array();
  for (std::size_t i = 0; i < report.sample_ids.size(); ++i)
    samples.push_back(json{{"id", report.sample_ids[i]}, {"rm_score", report.scores[i]}});
  json j = meta_line(meta);
  j["samples"] = std::move(samples);
  j["flagged_ids"] = report.flagged_ids;
  j["threshold_used"] = report.threshold_used;
  j["summary"] = json{{"min", report.summary.min},       {"p5", report.summary.p5},
                      {"p25", report.summary.p25},       {"median", report.summary.median},
                      {"p75", report.summary.p75},       {"p95", report.summary.p95},
                      {"max", report.summary.max}};
  std::ofstream out = open_out(path);
  out << j.dump(2) << "\n";
  require(static_cast<bool>(out), "io: write failed: " + path.string());
}

void write_bench_report(const std::filesystem::path& json_path,
                        const std::filesystem::path& table_path, const BenchReport& report,
                        const FileMeta& meta) {
  json cats = json::array();
  for (const CategoryResult& c : report.categories)
    cats.push_back(json{{"name", c.name},
                        {"pairs", c.pairs},
                        {"correct", c.correct},
                        {"accuracy", c.accuracy},
                        {"mean_chosen_len", c.mean_chosen_len},
                        {"mean_rejected_len", c.mean_rejected_len}});
  json j = meta_line(meta);
  j["categories"] = std::move(cats);
  j["total_pairs"] = report.total_pairs;
  j["total_correct"] = report.total_correct;
  j["overall_acc"] = report.overall_acc;
  j["macro_acc"] = report.macro_acc;
  {
    std::ofstream out = open_out(json_path);
    out << j.dump(2) << "\n";
    require(static_cast<bool>(out), "io: write failed: " + json_path.string());
  }
  {
    std::ofstream out = open_out(table_path);
    out << render_bench_table(report);
    require(static_cast<bool>(out), "io: write failed: " + table_path.string());
  }
}

void write_probe_report(const std::filesystem::path& path, const LengthBiasReport& report,
                        const FileMeta& meta) {
  json j = meta_line(meta);
  j["padding"] = report.padding;
  j["pairs"] = report.pairs;
  j["mean_delta"] = report.mean_delta;
  j["flip_fraction"] = report.flip_fraction;
  std::ofstream out = open_out(path);
  out << j.dump(2) << "\n";
  require(static_cast<bool>(out), "io: write failed: " + path.string());
}

void write_bon_audit(const std::filesystem::path& path, const std::vector<Token>& prompt,
                     const BestOfNResult& result, const FileMeta& meta) {
  json cands = json::array();
  for (const ScoredCandidate& c : result.candidates)
    cands.push_back(json{{"tokens", tokens_json(c.tokens)},
                         {"rm_score", c.rm_score},
                         {"seed", c.seed},
                         {"length", c.length}});
  json j = meta_line(meta);
  j["prompt_tokens"] = tokens_json(prompt);
  j["candidates"] = std::move(cands);
  j["winner_index"] = result.winner_index;
  j["winner"] = json{{"tokens", tokens_json(result.winner().tokens)},
                     {"rm_score", result.winner().rm_score},
                     {"seed", result.winner().seed},
                     {"length", result.winner().length}};
  std::ofstream out = open_out(path);
  out << j.dump(2) << "\n";
  require(static_cast<bool>(out), "io: write failed: " + path.string());
}

void write_sample_output(const std::filesystem::path& path, const std::vector<Token>& prompt,
                         const std::vector<Token>& response, std::uint64_t gen_seed,
                         const FileMeta& meta) {
  json j = meta_line(meta);
  j["prompt_tokens"] = tokens_json(prompt);
  j["response_tokens"] = tokens_json(response);
  j["gen_seed"] = gen_seed;
  std::ofstream out = open_out(path);
  out << j.dump(2) << "\n";
  require(static_cast<bool>(out), "io: write failed: " + path.string());
}

}  // namespace prefrl
