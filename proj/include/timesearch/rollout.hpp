#pragma once

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "timesearch/config.hpp"
#include "timesearch/core.hpp"
#include "timesearch/dpp.hpp"
#include "timesearch/embedding_store.hpp"
#include "timesearch/model_client.hpp"
#include "timesearch/protocol.hpp"
#include "timesearch/reward.hpp"

namespace timesearch {
namespace rollout {

struct Context {
  const HarnessConfig* cfg = nullptr;
  const PromptSet* prompts = nullptr;
  client::ChatClient* policy = nullptr;
  client::ChatClient* judge = nullptr;     // required for open-ended scoring
  client::Embedder* embedder = nullptr;    // required when searches execute
};

struct RolloutResult {
  Trajectory trajectory;
  std::vector<Message> transcript;
};

// Uniform temporal sampling of the initial preview, bounded by the frame and
// video-token budgets.
inline FrameSet build_preview(const FrameEmbeddingIndex& idx, const HarnessConfig& cfg,
                              int frame_cap = -1) {
  int want = std::min(cfg.preview_frames, cfg.max_total_frames);
  if (cfg.min_tokens_per_frame > 0)
    want = std::min(want, cfg.max_video_tokens / cfg.min_tokens_per_frame);
  if (frame_cap >= 0) want = std::min(want, frame_cap);
  FrameSet out;
  for (int row : strided_indices(idx.count(), want))
    out.frames.push_back(
        FrameRef{idx.video_id, idx.timestamps[static_cast<std::size_t>(row)], row});
  return out;
}

inline std::string render_options(const Question& q) {
  std::string out;
  for (const auto& o : q.options) {
    out += o.letter;
    out += ". ";
    out += o.text;
    out += "\n";
  }
  return out;
}

// Frame block for harness-authored messages: timestamp token then frame slot.
inline std::string render_frame_block(const FrameSet& frames) {
  std::string body;
  for (std::size_t i = 0; i < frames.frames.size(); ++i) {
    if (i > 0) body += "\n";
    body += format_timestamp(frames.frames[i].timestamp_s);
    body += kFrameMarker;
  }
  return body;
}

inline Message build_qa_message(const Question& q, const VideoSource& video,
                                const FrameSet& preview, const HarnessConfig& cfg,
                                const PromptSet& prompts) {
  Message m;
  m.role = Role::user;
  std::string preview_block;
  for (std::size_t i = 0; i < preview.frames.size(); ++i) preview_block += kFrameMarker;
  m.text = render_template(prompts.qa,
                           {{"duration", format_number(video.duration_s)},
                            {"preview", preview_block},
                            {"question", q.text},
                            {"options", render_options(q)},
                            {"max_search_turns", std::to_string(cfg.max_search_turns)}});
  m.frames = preview.frames;
  return m;
}

inline ToolCall clamp_tool_call(const ToolCall& raw, double duration_s, int frame_budget) {
  ToolCall out = raw;
  out.start_s = std::min(std::max(out.start_s, 0.0), duration_s);
  out.end_s = std::min(std::max(out.end_s, 0.0), duration_s);
  out.frame_budget = frame_budget;
  return out;
}

// One interactive trajectory: chat, parse, execute searches, advance, until
// the session answers, exhausts its budget, or breaks format. `frame_cap`
// (when >= 0) additionally bounds preview + searched frames, used by the
// stage-2 data filter.
inline RolloutResult run_trajectory(const Context& ctx, const Question& q,
                                    const VideoSource& video, const FrameEmbeddingIndex& idx,
                                    client::Phase phase = client::Phase::rollout,
                                    int frame_cap = -1) {
  const HarnessConfig& cfg = *ctx.cfg;
  const PromptSet& prompts = *ctx.prompts;
  const int total_cap =
      frame_cap >= 0 ? std::min(cfg.max_total_frames, frame_cap) : cfg.max_total_frames;

  protocol::SessionState state;
  state.question = q;
  state.preview = build_preview(idx, cfg, total_cap);
  state.max_search_turns = cfg.max_search_turns;
  state.transcript.push_back(Message{Role::system, prompts.system, {}});
  state.transcript.push_back(build_qa_message(q, video, state.preview, cfg, prompts));

  int frames_used = state.preview.size();
  while (state.status == protocol::SessionStatus::active) {
    client::ChatRequest req;
    req.messages = state.transcript;
    req.max_tokens = cfg.max_completion_length;
    req.temperature = cfg.temperature;
    req.tools_enabled = true;
    req.meta = {q.id, phase, state.turns_used};
    client::ChatResponse resp = ctx.policy->chat(req);

    protocol::TurnParse turn = protocol::parse_turn(resp.text);
    std::optional<FrameSet> result;
    if (turn.format_ok && turn.is_tool_call() && state.can_search()) {
      ToolCall exec =
          clamp_tool_call(turn.tool_call(), video.duration_s, cfg.frames_per_search);
      const int remaining = std::max(0, total_cap - frames_used);
      const int exec_budget = std::min(cfg.frames_per_search, remaining);
      FrameSet found;
      if (exec.start_s < exec.end_s && exec_budget > 0) {
        if (!ctx.embedder) throw std::runtime_error("run_trajectory: no embedder configured");
        Eigen::VectorXd qvec = ctx.embedder->embed({exec.query})[0];
        if (qvec.size() != idx.dim)
          throw std::runtime_error("query embedding dimension " + std::to_string(qvec.size()) +
                                   " does not match index dimension " + std::to_string(idx.dim));
        ToolCall search_call = exec;
        search_call.frame_budget = exec_budget;
        found = dpp::search(idx, search_call, qvec, {cfg.epsilon, cfg.max_candidates});
      }
      frames_used += found.size();
      turn.action = exec;  // store the executed (clamped) call
      result = std::move(found);
    }
    protocol::advance(state, turn, std::move(result), prompts);
  }
  return RolloutResult{protocol::to_trajectory(state), state.transcript};
}

struct CsvRecord {
  std::string raw;                // verbatim re-answer response
  std::string answer;             // extracted answer text ("" on violation)
  bool violation = false;         // response attempted a tool call
  bool flagged = false;           // transport failure; scored 0
  std::vector<FrameRef> sent_frames;
};

inline void to_json(json& j, const CsvRecord& c) {
  j = json{{"raw", c.raw},
           {"answer", c.answer},
           {"violation", c.violation},
           {"flagged", c.flagged},
           {"frames", c.sent_frames}};
}

inline void from_json(const json& j, CsvRecord& c) {
  j.at("raw").get_to(c.raw);
  j.at("answer").get_to(c.answer);
  j.at("violation").get_to(c.violation);
  j.at("flagged").get_to(c.flagged);
  c.sent_frames = j.at("frames").get<std::vector<FrameRef>>();
}

// Re-answer the question from the searched frames alone, tools disabled.
inline CsvRecord run_csv(const Context& ctx, const Question& q, const FrameSet& dynamic_frames) {
  const HarnessConfig& cfg = *ctx.cfg;
  Message m;
  m.role = Role::user;
  std::string block = dynamic_frames.empty() ? "(none)" : render_frame_block(dynamic_frames);
  m.text = render_template(ctx.prompts->csv, {{"frames", block},
                                              {"question", q.text},
                                              {"options", render_options(q)}});
  m.frames = dynamic_frames.frames;

  client::ChatRequest req;
  req.messages.push_back(m);
  req.max_tokens = cfg.max_completion_length;
  req.temperature = cfg.csv_temperature;
  req.tools_enabled = false;
  req.meta = {q.id, client::Phase::csv, 0};

  CsvRecord rec;
  rec.sent_frames = dynamic_frames.frames;
  try {
    rec.raw = ctx.policy->chat(req).text;
  } catch (const client::TransportError&) {
    rec.flagged = true;
    return rec;
  }
  if (rec.raw.find("<tool_call>") != std::string::npos) {
    rec.violation = true;  // searching is prohibited during re-answering
    return rec;
  }
  rec.answer = protocol::strip_answer_tags(rec.raw);
  return rec;
}

struct ScoredTrajectory {
  Trajectory trajectory;
  RewardBreakdown reward;
  std::optional<CsvRecord> csv;             // absent when gated off (wrong answer)
  std::optional<std::string> judge_answer;  // raw verdict for the final answer
  std::optional<std::string> judge_csv;     // raw verdict for the re-answer
};

inline void to_json(json& j, const ScoredTrajectory& s) {
  j = json{{"trajectory", s.trajectory}, {"reward", s.reward}};
  j["csv"] = s.csv ? json(*s.csv) : json(nullptr);
  j["judge_answer"] = s.judge_answer ? json(*s.judge_answer) : json(nullptr);
  j["judge_csv"] = s.judge_csv ? json(*s.judge_csv) : json(nullptr);
}

inline void from_json(const json& j, ScoredTrajectory& s) {
  s.trajectory = j.at("trajectory").get<Trajectory>();
  s.reward = j.at("reward").get<RewardBreakdown>();
  s.csv.reset();
  if (!j.at("csv").is_null()) s.csv = j.at("csv").get<CsvRecord>();
  s.judge_answer.reset();
  if (!j.at("judge_answer").is_null()) s.judge_answer = j.at("judge_answer").get<std::string>();
  s.judge_csv.reset();
  if (!j.at("judge_csv").is_null()) s.judge_csv = j.at("judge_csv").get<std::string>();
}

// Scores one trajectory. The re-answer pass runs only when the original
// answer is correct; the completeness gate zeroes it otherwise.
inline ScoredTrajectory score_trajectory(const Context& ctx, const Question& q,
                                         const Trajectory& traj) {
  ScoredTrajectory out;
  out.trajectory = traj;

  const int rfmt = protocol::format_valid(traj) ? 1 : 0;
  int racc = 0;
  if (traj.final_answer) {
    if (q.kind == QuestionKind::mcq) {
      racc = reward::accuracy_mcq(*traj.final_answer, q);
    } else {
      if (!ctx.judge) throw std::runtime_error("score_trajectory: no judge configured");
      auto verdict =
          reward::accuracy_open(*ctx.judge, *traj.final_answer, q, *ctx.prompts, *ctx.cfg);
      racc = verdict.score;
      if (!verdict.flagged) out.judge_answer = verdict.raw;
    }
  }

  int rc = 0;
  if (racc == 1) {
    FrameSet dynamic = protocol::extract_dynamic_frameset(traj);
    CsvRecord csv = run_csv(ctx, q, dynamic);
    int acc_csv = 0;
    if (!csv.violation && !csv.flagged) {
      if (q.kind == QuestionKind::mcq) {
        acc_csv = reward::accuracy_mcq(csv.answer, q);
      } else {
        auto verdict = reward::accuracy_open(*ctx.judge, csv.answer, q, *ctx.prompts, *ctx.cfg);
        acc_csv = verdict.score;
        if (!verdict.flagged) out.judge_csv = verdict.raw;
      }
    }
    rc = reward::completeness_reward(racc, acc_csv);
    out.csv = std::move(csv);
  }

  out.reward = reward::total_reward(rc, rfmt, racc);
  return out;
}

struct GroupRecord {
  std::string question_id;
  std::vector<ScoredTrajectory> trajectories;
  std::vector<double> advantages;
  json config;  // resolved harness config snapshot
};

inline void to_json(json& j, const GroupRecord& g) {
  j = json{{"question_id", g.question_id},
           {"trajectories", g.trajectories},
           {"advantages", g.advantages},
           {"config", g.config}};
}

inline void from_json(const json& j, GroupRecord& g) {
  j.at("question_id").get_to(g.question_id);
  g.trajectories = j.at("trajectories").get<std::vector<ScoredTrajectory>>();
  j.at("advantages").get_to(g.advantages);
  g.config = j.at("config");
}

struct GroupRun {
  GroupRecord record;
  std::vector<std::vector<Message>> transcripts;  // parallel to trajectories
};

// Runs group_size independent trajectories of the same question, scores them,
// and computes group-relative advantages. Transport-failed trajectories are
// replaced by spares (at most 2); a group that cannot reach full size, or
// loses more than half its members to transport, is dropped.
inline std::optional<GroupRun> run_group(const Context& ctx, const Question& q,
                                         const VideoSource& video,
                                         const FrameEmbeddingIndex& idx) {
  const HarnessConfig& cfg = *ctx.cfg;
  validate(cfg.group());
  const int group_size = cfg.group_size;
  const int max_attempts = group_size + 2;

  GroupRun run;
  int attempts = 0;
  int failures = 0;
  std::vector<RolloutResult> rollouts;
  while (static_cast<int>(rollouts.size()) < group_size && attempts < max_attempts) {
    ++attempts;
    try {
      rollouts.push_back(run_trajectory(ctx, q, video, idx));
    } catch (const client::TransportError& e) {
      ++failures;
      std::cerr << "[rollout] transport failure on question " << q.id << " (attempt " << attempts
                << "): " << e.what() << "\n";
      if (failures * 2 > group_size) {
        std::cerr << "[rollout] dropping group for question " << q.id
                  << ": more than half the group failed on transport\n";
        return std::nullopt;
      }
    }
  }
  if (static_cast<int>(rollouts.size()) < group_size) {
    std::cerr << "[rollout] dropping group for question " << q.id
              << ": spares exhausted before reaching group size\n";
    return std::nullopt;
  }

  std::vector<double> totals;
  for (const auto& r : rollouts) {
    run.record.trajectories.push_back(score_trajectory(ctx, q, r.trajectory));
    run.transcripts.push_back(r.transcript);
    totals.push_back(run.record.trajectories.back().reward.total);
  }

  run.record.question_id = q.id;
  run.record.advantages = reward::group_advantages(totals, cfg.scale_rewards).values;
  to_json(run.record.config, cfg);
  return run;
}

// Offline re-scoring of a persisted group from its recorded raw materials
// (trajectories, re-answer texts, judge verdicts). No model calls are made;
// the result must reproduce the stored rewards exactly.
inline GroupRecord rescore_group(const GroupRecord& stored, const Question& q,
                                 bool scale_rewards) {
  GroupRecord out = stored;
  std::vector<double> totals;
  for (auto& member : out.trajectories) {
    const Trajectory& traj = member.trajectory;
    const int rfmt = protocol::format_valid(traj) ? 1 : 0;
    int racc = 0;
    if (traj.final_answer) {
      if (q.kind == QuestionKind::mcq)
        racc = reward::accuracy_mcq(*traj.final_answer, q);
      else
        racc = member.judge_answer ? reward::parse_binary_verdict(*member.judge_answer) : 0;
    }
    int rc = 0;
    if (racc == 1 && member.csv && !member.csv->violation && !member.csv->flagged) {
      int acc_csv = 0;
      if (q.kind == QuestionKind::mcq)
        acc_csv = reward::accuracy_mcq(member.csv->answer, q);
      else
        acc_csv = member.judge_csv ? reward::parse_binary_verdict(*member.judge_csv) : 0;
      rc = reward::completeness_reward(racc, acc_csv);
    }
    member.reward = reward::total_reward(rc, rfmt, racc);
    totals.push_back(member.reward.total);
  }
  out.advantages = reward::group_advantages(totals, scale_rewards).values;
  return out;
}

}  // namespace rollout
}  // namespace timesearch
