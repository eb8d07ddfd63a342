// Command-line front end: rollout, eval, filter, select, reward, report.
// One JSON config file plus flag overrides (flags win); every output artifact
// embeds the resolved config and the prompt-template content hash.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "timesearch/config.hpp"
#include "timesearch/core.hpp"
#include "timesearch/datafilter.hpp"
#include "timesearch/dpp.hpp"
#include "timesearch/embedding_store.hpp"
#include "timesearch/eval.hpp"
#include "timesearch/model_client.hpp"
#include "timesearch/prompts.hpp"
#include "timesearch/rollout.hpp"

namespace ts = timesearch;
using ts::json;

namespace {

struct Clients {
  std::unique_ptr<ts::client::ChatClient> owned_policy;
  std::unique_ptr<ts::client::ChatClient> owned_judge;
  std::unique_ptr<ts::client::Embedder> embedder;
  ts::client::ChatClient* policy = nullptr;
  ts::client::ChatClient* judge = nullptr;
};

// With --mock a single scripted client serves both policy and judge roles so
// all phases replay from one file. Live endpoints get one client each.
Clients make_clients(const ts::HarnessConfig& cfg, const std::string& mock_path,
                     const std::string& query_embeddings) {
  Clients c;
  if (!mock_path.empty()) {
    c.owned_policy = std::make_unique<ts::client::MockChatClient>(
        ts::client::MockScript::load(mock_path));
    c.policy = c.owned_policy.get();
    c.judge = c.owned_policy.get();
  } else {
    ts::client::RetryPolicy retry{cfg.retry_max, cfg.retry_backoff_ms};
    if (!cfg.endpoints.policy.empty()) {
      c.owned_policy = std::make_unique<ts::client::HttpChatClient>(
          cfg.endpoints.policy, cfg.endpoints.policy_key, retry, cfg.frame_asset_root);
      c.policy = c.owned_policy.get();
    }
    if (!cfg.endpoints.judge.empty()) {
      c.owned_judge = std::make_unique<ts::client::HttpChatClient>(
          cfg.endpoints.judge, cfg.endpoints.judge_key, retry, cfg.frame_asset_root);
      c.judge = c.owned_judge.get();
    }
  }
  if (!query_embeddings.empty()) {
    c.embedder = std::make_unique<ts::client::OfflineEmbedder>(query_embeddings);
  } else if (!cfg.endpoints.embed.empty()) {
    c.embedder = std::make_unique<ts::client::HttpEmbedder>(
        cfg.endpoints.embed, cfg.endpoints.embed_key,
        ts::client::RetryPolicy{cfg.retry_max, cfg.retry_backoff_ms});
  }
  return c;
}

json output_header(const ts::HarnessConfig& cfg, const ts::PromptSet& prompts,
                   const std::string& command) {
  json cfg_json;
  to_json(cfg_json, cfg);
  return json{{"command", command},
              {"config", cfg_json},
              {"config_hash", ts::config_hash(cfg)},
              {"template_hash", ts::template_hash(prompts)}};
}

std::vector<json> load_jsonl(const std::string& path) {
  std::vector<json> out;
  for (const auto& line : ts::split_lines(ts::read_file(path))) {
    std::string t = ts::trim(line);
    if (t.empty()) continue;
    json j = json::parse(t);
    if (ts::is_header_line(j)) continue;
    out.push_back(std::move(j));
  }
  return out;
}

int cmd_select(const ts::HarnessConfig& cfg, const std::string& index_dir, double start,
               double end, const std::string& query_vec_path, int budget, bool trace) {
  ts::FrameEmbeddingIndex idx = ts::load_index(index_dir);
  auto values = json::parse(ts::read_file(query_vec_path)).get<std::vector<double>>();
  if (static_cast<int>(values.size()) != idx.dim)
    throw std::runtime_error("query vector dimension " + std::to_string(values.size()) +
                             " does not match index dimension " + std::to_string(idx.dim));
  Eigen::VectorXd query = Eigen::Map<Eigen::VectorXd>(values.data(), idx.dim);
  double norm = query.norm();
  if (!(norm > 0.0)) throw std::runtime_error("query vector has zero norm");
  query /= norm;

  json out{{"video_id", idx.video_id}, {"start_s", start}, {"end_s", end}, {"budget", budget}};
  ts::CandidateSet cands = ts::frames_in_clip(idx, std::max(0.0, start), end, cfg.max_candidates);
  out["candidates"] = cands.size();

  json selected = json::array();
  if (!cands.empty() && cands.size() <= budget) {
    out["uniform_fallback"] = true;
    for (int i = 0; i < cands.size(); ++i)
      selected.push_back(json{{"index", cands.indices[static_cast<std::size_t>(i)]},
                              {"timestamp_s", cands.timestamps[static_cast<std::size_t>(i)]}});
  } else if (!cands.empty()) {
    out["uniform_fallback"] = false;
    auto rel = ts::dpp::relevance_scores(cands.embeddings, query, cfg.epsilon);
    auto kernel = ts::dpp::build_kernel(cands.embeddings, rel);
    auto greedy = ts::dpp::greedy_map(kernel, budget);
    std::vector<int> order = greedy.selected;
    std::sort(order.begin(), order.end());
    for (int pos : order)
      selected.push_back(json{{"index", cands.indices[static_cast<std::size_t>(pos)]},
                              {"timestamp_s", cands.timestamps[static_cast<std::size_t>(pos)]}});
    if (trace) {
      json steps = json::array();
      for (std::size_t t = 0; t < greedy.selected.size(); ++t)
        steps.push_back(json{
            {"candidate", greedy.selected[t]},
            {"index", cands.indices[static_cast<std::size_t>(greedy.selected[t])]},
            {"gain_logdet", greedy.gains[t]}});
      out["trace"] = steps;
    }
  } else {
    out["uniform_fallback"] = false;
  }
  out["selected"] = selected;
  std::cout << out.dump() << "\n";
  return 0;
}

int cmd_rollout(const ts::HarnessConfig& cfg, const ts::PromptSet& prompts,
                const std::string& dataset_path, const std::string& index_root,
                const std::string& out_path, const std::string& mock_path,
                const std::string& query_embeddings, const std::string& transcripts_dir,
                const std::string& trajectories_out) {
  auto dataset = ts::load_dataset(dataset_path);
  Clients clients = make_clients(cfg, mock_path, query_embeddings);
  if (!clients.policy) throw std::runtime_error("rollout: no policy endpoint or mock configured");
  ts::IndexCache indexes(index_root);

  ts::rollout::Context ctx{&cfg, &prompts, clients.policy, clients.judge,
                           clients.embedder.get()};

  std::ostringstream groups;
  std::ostringstream trajectories;
  groups << json{{"_header", output_header(cfg, prompts, "rollout")}}.dump() << "\n";
  int written = 0, dropped = 0;
  for (const auto& rec : dataset) {
    const ts::FrameEmbeddingIndex& idx = indexes.get(rec.video.video_id);
    auto run = ts::rollout::run_group(ctx, rec.question, rec.video, idx);
    if (!run) {
      ++dropped;
      continue;
    }
    json g;
    to_json(g, run->record);
    groups << g.dump() << "\n";
    ++written;
    for (std::size_t m = 0; m < run->record.trajectories.size(); ++m) {
      json t;
      to_json(t, run->record.trajectories[m].trajectory);
      trajectories << t.dump() << "\n";
      if (!transcripts_dir.empty()) {
        std::filesystem::create_directories(transcripts_dir);
        std::ostringstream lines;
        for (const auto& msg : run->transcripts[m]) {
          json mj;
          to_json(mj, msg);
          lines << mj.dump() << "\n";
        }
        ts::write_file(transcripts_dir + "/" + rec.question.id + "_m" + std::to_string(m) +
                           ".jsonl",
                       lines.str());
      }
    }
  }
  ts::write_file(out_path, groups.str());
  if (!trajectories_out.empty()) ts::write_file(trajectories_out, trajectories.str());

  json summary{{"command", "rollout"},
               {"groups", written},
               {"dropped", dropped},
               {"out", out_path},
               {"config_hash", ts::config_hash(cfg)},
               {"template_hash", ts::template_hash(prompts)}};
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_reward(const ts::HarnessConfig& cfg, const ts::PromptSet& prompts,
               const std::string& groups_path, const std::string& dataset_path,
               const std::string& out_path) {
  auto dataset = ts::load_dataset(dataset_path);
  std::map<std::string, const ts::Question*> questions;
  for (const auto& r : dataset) questions[r.question.id] = &r.question;

  std::ostringstream out;
  out << json{{"_header", output_header(cfg, prompts, "reward")}}.dump() << "\n";
  int groups = 0, mismatches = 0;
  for (const auto& line : load_jsonl(groups_path)) {
    ts::rollout::GroupRecord stored = line.get<ts::rollout::GroupRecord>();
    auto it = questions.find(stored.question_id);
    if (it == questions.end())
      throw std::runtime_error("groups file references unknown question " + stored.question_id);
    bool scale = stored.config.contains("scale_rewards")
                     ? stored.config.at("scale_rewards").get<bool>()
                     : cfg.scale_rewards;
    ts::rollout::GroupRecord rescored = ts::rollout::rescore_group(stored, *it->second, scale);
    ++groups;
    for (std::size_t i = 0; i < stored.trajectories.size(); ++i)
      if (!(stored.trajectories[i].reward == rescored.trajectories[i].reward)) ++mismatches;
    json g;
    to_json(g, rescored);
    out << g.dump() << "\n";
  }
  if (!out_path.empty()) ts::write_file(out_path, out.str());

  json summary{{"command", "reward"},
               {"groups", groups},
               {"reward_mismatches", mismatches},
               {"out", out_path}};
  std::cout << summary.dump() << "\n";
  return mismatches == 0 ? 0 : 2;
}

int cmd_eval(const ts::HarnessConfig& cfg, const ts::PromptSet& prompts,
             const std::string& trajectories_path, const std::string& dataset_path,
             const std::string& index_root, const std::string& out_path,
             const std::string& mock_path, const std::string& query_embeddings) {
  auto dataset = ts::load_dataset(dataset_path);
  Clients clients = make_clients(cfg, mock_path, query_embeddings);
  if (!clients.policy) throw std::runtime_error("eval: no policy endpoint or mock configured");
  if (!clients.judge) throw std::runtime_error("eval: no judge endpoint or mock configured");
  ts::IndexCache indexes(index_root);

  std::vector<ts::Trajectory> trajectories;
  for (const auto& line : load_jsonl(trajectories_path))
    trajectories.push_back(line.get<ts::Trajectory>());

  ts::rollout::Context ctx{&cfg, &prompts, clients.policy, clients.judge,
                           clients.embedder.get()};
  ts::metrics::EvalReport report = ts::metrics::run_eval(ctx, dataset, trajectories, indexes);

  json rj;
  to_json(rj, report);
  ts::write_file(out_path, rj.dump(2) + "\n");

  json summary{{"command", "eval"},
               {"rows", report.rows.size()},
               {"aggregates", report.aggregates},
               {"judge", report.judge_identity},
               {"out", out_path}};
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_filter(const ts::HarnessConfig& cfg, const ts::PromptSet& prompts,
               const std::string& dataset_path, const std::string& index_root,
               const std::string& out_path, const std::string& verdicts_path,
               const std::string& mock_path, const std::string& query_embeddings) {
  auto dataset = ts::load_dataset(dataset_path);
  Clients clients = make_clients(cfg, mock_path, query_embeddings);
  if (!clients.policy) throw std::runtime_error("filter: no policy endpoint or mock configured");
  ts::IndexCache indexes(index_root);

  ts::rollout::Context ctx{&cfg, &prompts, clients.policy, clients.judge,
                           clients.embedder.get()};
  auto result = ts::filter::run_pipeline(
      ctx, dataset, [&indexes](const std::string& id) -> const ts::FrameEmbeddingIndex& {
        return indexes.get(id);
      });

  ts::save_dataset(out_path, result.kept, output_header(cfg, prompts, "filter"));
  if (!verdicts_path.empty()) {
    std::ostringstream verdicts;
    verdicts << json{{"_header", output_header(cfg, prompts, "filter")}}.dump() << "\n";
    for (const auto& v : result.verdicts) {
      json vj;
      to_json(vj, v);
      verdicts << vj.dump() << "\n";
    }
    ts::write_file(verdicts_path, verdicts.str());
  }

  json summary = ts::filter::summary_json(result);
  summary["command"] = "filter";
  summary["out"] = out_path;
  summary["config_hash"] = ts::config_hash(cfg);
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_report(const std::string& report_path, const std::string& csv_path) {
  ts::metrics::EvalReport report =
      json::parse(ts::read_file(report_path)).get<ts::metrics::EvalReport>();

  std::cout << "metric            value\n";
  for (const auto& [key, value] : report.aggregates) {
    std::printf("%-17s %.2f\n", key.c_str(), value);
  }
  std::string csv = ts::metrics::report_to_bucket_csv(report);
  if (!csv_path.empty()) {
    ts::write_file(csv_path, csv);
    std::cout << "wrote " << csv_path << "\n";
  } else {
    std::cout << csv;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal-search harness: interleaved text-video rollouts, "
               "group-relative rewards, search-quality evaluation, and data filtering"};
  app.require_subcommand(1);

  std::string config_file, prompts_dir;
  app.add_option("--config", config_file, "JSON config file (flags override its values)");
  app.add_option("--prompts-dir", prompts_dir, "directory of prompt template files");

  // select
  auto* select = app.add_subcommand("select", "run the frame search function once");
  std::string sel_index, sel_query_vec;
  double sel_start = 0.0, sel_end = 0.0;
  int sel_budget = 8;
  bool sel_trace = false;
  select->add_option("--index", sel_index, "embedding index directory")->required();
  select->add_option("--start", sel_start, "clip start, seconds")->required();
  select->add_option("--end", sel_end, "clip end, seconds")->required();
  select->add_option("--query-vec", sel_query_vec, "JSON array file with the query vector")
      ->required();
  select->add_option("--budget", sel_budget, "frames to select")
      ->check(CLI::PositiveNumber);
  select->add_flag("--trace", sel_trace, "include the greedy gain trace");

  // rollout
  auto* roll = app.add_subcommand("rollout", "run scored group rollouts over a dataset");
  std::string roll_dataset, roll_index_root, roll_out, roll_mock, roll_embeds,
      roll_transcripts, roll_traj_out;
  roll->add_option("--dataset", roll_dataset, "question JSONL")->required();
  roll->add_option("--index-root", roll_index_root, "directory of per-video indexes")->required();
  roll->add_option("--out", roll_out, "output group JSONL")->required();
  roll->add_option("--mock", roll_mock, "scripted response JSONL (offline mode)");
  roll->add_option("--query-embeddings", roll_embeds, "precomputed query-embedding JSON");
  roll->add_option("--transcripts-dir", roll_transcripts, "write per-trajectory transcripts here");
  roll->add_option("--trajectories-out", roll_traj_out, "write trajectory-per-line JSONL");

  // reward
  auto* rew = app.add_subcommand("reward", "re-score persisted groups offline");
  std::string rew_groups, rew_dataset, rew_out;
  rew->add_option("--groups", rew_groups, "group JSONL from rollout")->required();
  rew->add_option("--dataset", rew_dataset, "question JSONL with gold answers")->required();
  rew->add_option("--out", rew_out, "rescored group JSONL");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate trajectories against a dataset");
  std::string ev_traj, ev_dataset, ev_index_root, ev_out, ev_mock, ev_embeds;
  ev->add_option("--trajectories", ev_traj, "trajectory JSONL")->required();
  ev->add_option("--dataset", ev_dataset, "question JSONL")->required();
  ev->add_option("--index-root", ev_index_root, "directory of per-video indexes")->required();
  ev->add_option("--out", ev_out, "output report JSON")->required();
  ev->add_option("--mock", ev_mock, "scripted response JSONL (offline mode)");
  ev->add_option("--query-embeddings", ev_embeds, "precomputed query-embedding JSON");

  // filter
  auto* fil = app.add_subcommand("filter", "two-stage training-data filter");
  std::string fil_dataset, fil_index_root, fil_out, fil_verdicts, fil_mock, fil_embeds;
  fil->add_option("--dataset", fil_dataset, "question JSONL")->required();
  fil->add_option("--index-root", fil_index_root, "directory of per-video indexes")->required();
  fil->add_option("--out", fil_out, "kept-sample JSONL")->required();
  fil->add_option("--verdicts", fil_verdicts, "per-sample verdict JSONL");
  fil->add_option("--mock", fil_mock, "scripted response JSONL (offline mode)");
  fil->add_option("--query-embeddings", fil_embeds, "precomputed query-embedding JSON");

  // report
  auto* rep = app.add_subcommand("report", "render aggregates from an eval report");
  std::string rep_report, rep_csv;
  rep->add_option("--report", rep_report, "report JSON from eval")->required();
  rep->add_option("--out-csv", rep_csv, "plot-ready CSV by duration bucket");

  // Config-overriding flags shared by the heavy subcommands.
  ts::HarnessConfig defaults;
  std::optional<int> opt_group_size, opt_max_turns, opt_frames_per_search, opt_stage2_attempts,
      opt_frame_cap, opt_max_candidates, opt_preview_frames;
  std::optional<double> opt_delta, opt_epsilon, opt_temperature;
  std::optional<bool> opt_scale_rewards;
  for (auto* sub : {roll, ev, fil}) {
    sub->add_option("--group-size", opt_group_size, "rollouts per question");
    sub->add_option("--max-turns", opt_max_turns, "search-call budget per trajectory");
    sub->add_option("--frames-per-search", opt_frames_per_search, "frames per search call");
    sub->add_option("--preview-frames", opt_preview_frames, "uniformly sampled preview size");
    sub->add_option("--scale-rewards", opt_scale_rewards, "divide advantages by group std");
    sub->add_option("--delta", opt_delta, "temporal matching window, seconds");
    sub->add_option("--epsilon", opt_epsilon, "min-max normalization guard");
    sub->add_option("--temperature", opt_temperature, "policy sampling temperature");
    sub->add_option("--max-candidates", opt_max_candidates, "candidate frames per search");
    sub->add_option("--stage2-attempts", opt_stage2_attempts, "filter stage-2 rollouts");
    sub->add_option("--frame-cap", opt_frame_cap, "filter stage-2 total frame cap");
  }
  select->add_option("--epsilon", opt_epsilon, "min-max normalization guard");
  select->add_option("--max-candidates", opt_max_candidates, "candidate frames per search");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage errors exit 1, help exits 0
  }

  try {
    ts::HarnessConfig cfg;
    if (!config_file.empty()) {
      json j = json::parse(ts::read_file(config_file));
      from_json(j, cfg);
    }
    ts::apply_env(cfg);
    if (opt_group_size) cfg.group_size = *opt_group_size;
    if (opt_max_turns) cfg.max_search_turns = *opt_max_turns;
    if (opt_frames_per_search) cfg.frames_per_search = *opt_frames_per_search;
    if (opt_preview_frames) cfg.preview_frames = *opt_preview_frames;
    if (opt_scale_rewards) cfg.scale_rewards = *opt_scale_rewards;
    if (opt_delta) cfg.delta = *opt_delta;
    if (opt_epsilon) cfg.epsilon = *opt_epsilon;
    if (opt_temperature) cfg.temperature = *opt_temperature;
    if (opt_max_candidates) cfg.max_candidates = *opt_max_candidates;
    if (opt_stage2_attempts) cfg.stage2_attempts = *opt_stage2_attempts;
    if (opt_frame_cap) cfg.filter_frame_cap = *opt_frame_cap;
    if (!prompts_dir.empty()) cfg.prompts_dir = prompts_dir;
    ts::validate(cfg);
    ts::PromptSet prompts = ts::load_prompts(cfg.prompts_dir);

    if (select->parsed())
      return cmd_select(cfg, sel_index, sel_start, sel_end, sel_query_vec, sel_budget, sel_trace);
    if (roll->parsed())
      return cmd_rollout(cfg, prompts, roll_dataset, roll_index_root, roll_out, roll_mock,
                         roll_embeds, roll_transcripts, roll_traj_out);
    if (rew->parsed()) return cmd_reward(cfg, prompts, rew_groups, rew_dataset, rew_out);
    if (ev->parsed())
      return cmd_eval(cfg, prompts, ev_traj, ev_dataset, ev_index_root, ev_out, ev_mock,
                      ev_embeds);
    if (fil->parsed())
      return cmd_filter(cfg, prompts, fil_dataset, fil_index_root, fil_out, fil_verdicts,
                        fil_mock, fil_embeds);
    if (rep->parsed()) return cmd_report(rep_report, rep_csv);
    std::cerr << "no subcommand\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
