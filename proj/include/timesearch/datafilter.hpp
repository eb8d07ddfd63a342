#pragma once

#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "timesearch/rollout.hpp"

namespace timesearch {
namespace filter {

enum class Stage1Verdict { kept, dropped_trivial };
enum class Stage2Verdict { kept, dropped_unsolvable };

inline std::string to_string(Stage1Verdict v) {
  return v == Stage1Verdict::kept ? "kept" : "dropped_trivial";
}

inline std::string to_string(Stage2Verdict v) {
  return v == Stage2Verdict::kept ? "kept" : "dropped_unsolvable";
}

struct FilterVerdict {
  std::string question_id;
  Stage1Verdict stage1 = Stage1Verdict::kept;
  std::optional<Stage2Verdict> stage2;  // populated only when stage 1 kept
  int stage1_attempts = 0;
  int stage2_attempts = 0;
  std::vector<std::string> notes;

  bool flagged() const {
    for (const auto& n : notes)
      if (n.rfind("transport", 0) == 0) return true;
    return false;
  }

  bool kept() const {
    return stage1 == Stage1Verdict::kept &&
           (!stage2 || *stage2 == Stage2Verdict::kept);
  }
};

inline void to_json(json& j, const FilterVerdict& v) {
  j = json{{"question_id", v.question_id},
           {"stage1", to_string(v.stage1)},
           {"attempts", json{{"stage1", v.stage1_attempts}, {"stage2", v.stage2_attempts}}},
           {"notes", v.notes}};
  j["stage2"] = v.stage2 ? json(to_string(*v.stage2)) : json(nullptr);
}

namespace detail {

// Correctness of an answer text against the gold answer, judge-backed for
// open-ended questions.
inline int answer_correct(const rollout::Context& ctx, const Question& q,
                          const std::string& answer_text) {
  if (q.kind == QuestionKind::mcq) return reward::accuracy_mcq(answer_text, q);
  if (!ctx.judge) throw std::runtime_error("filter: no judge configured for open questions");
  return reward::accuracy_open(*ctx.judge, answer_text, q, *ctx.prompts, *ctx.cfg).score;
}

}  // namespace detail

// Stage 1: visual-dependency screen. The policy answers from a few uniformly
// sampled frames with no tools; a correct answer marks the sample as solvable
// through linguistic shortcuts and drops it. Malformed responses are retried;
// when retries run out the sample is kept (benefit of the doubt).
inline FilterVerdict stage1_filter(const rollout::Context& ctx, const DatasetRecord& rec,
                                   const FrameEmbeddingIndex& idx) {
  const Question& q = rec.question;
  FilterVerdict verdict;
  verdict.question_id = q.id;

  FrameSet frames;
  for (int row : strided_indices(idx.count(), ctx.cfg->stage1_frames))
    frames.frames.push_back(
        FrameRef{idx.video_id, idx.timestamps[static_cast<std::size_t>(row)], row});

  Message m;
  m.role = Role::user;
  m.text = render_template(ctx.prompts->notools_qa,
                           {{"frames", rollout::render_frame_block(frames)},
                            {"question", q.text},
                            {"options", rollout::render_options(q)}});
  m.frames = frames.frames;

  for (int attempt = 0; attempt < ctx.cfg->format_retry_cap; ++attempt) {
    ++verdict.stage1_attempts;
    client::ChatRequest req;
    req.messages.push_back(m);
    req.max_tokens = ctx.cfg->max_completion_length;
    req.temperature = ctx.cfg->csv_temperature;
    req.tools_enabled = false;
    req.meta = {q.id, client::Phase::filter_s1, 0};

    std::string text;
    try {
      text = ctx.policy->chat(req).text;
    } catch (const client::TransportError& e) {
      verdict.notes.push_back(std::string("transport failure in stage 1: ") + e.what());
      return verdict;  // kept, flagged
    }
    protocol::TurnParse turn = protocol::parse_turn(text);
    if (!turn.format_ok || !turn.is_answer()) continue;  // retry malformed output
    if (detail::answer_correct(ctx, q, turn.answer()) == 1)
      verdict.stage1 = Stage1Verdict::dropped_trivial;
    return verdict;
  }
  verdict.notes.push_back("stage 1 format retries exhausted; sample kept");
  return verdict;
}

// Stage 2: search-usefulness screen. Full interleaved rollouts under the
// production interaction grammar with the total frame intake capped; a sample
// no attempt can solve is dropped as noise.
inline void stage2_filter(const rollout::Context& ctx, const DatasetRecord& rec,
                          const FrameEmbeddingIndex& idx, FilterVerdict& verdict) {
  const Question& q = rec.question;
  verdict.stage2 = Stage2Verdict::dropped_unsolvable;
  for (int attempt = 0; attempt < ctx.cfg->stage2_attempts; ++attempt) {
    ++verdict.stage2_attempts;
    Trajectory traj;
    try {
      traj = rollout::run_trajectory(ctx, q, rec.video, idx, client::Phase::filter_s2,
                                     ctx.cfg->filter_frame_cap)
                 .trajectory;
    } catch (const client::TransportError& e) {
      verdict.stage2 = Stage2Verdict::kept;  // never shrink the dataset on faults
      verdict.notes.push_back(std::string("transport failure in stage 2: ") + e.what());
      return;
    }
    if (traj.final_answer && detail::answer_correct(ctx, q, *traj.final_answer) == 1) {
      verdict.stage2 = Stage2Verdict::kept;
      return;
    }
  }
}

struct PipelineResult {
  std::vector<DatasetRecord> kept;  // flagged samples included
  std::vector<FilterVerdict> verdicts;
  int input_count = 0;
  int kept_count = 0;  // cleanly kept
  int dropped_trivial = 0;
  int dropped_unsolvable = 0;
  int flagged = 0;  // kept due to transport faults
};

inline json summary_json(const PipelineResult& r) {
  return json{{"input", r.input_count},
              {"kept", r.kept_count},
              {"dropped_trivial", r.dropped_trivial},
              {"dropped_unsolvable", r.dropped_unsolvable},
              {"flagged", r.flagged}};
}

// Applies stage 1 then stage 2 in order; one failing sample never aborts the
// batch. Verdicts come back in input order.
inline PipelineResult run_pipeline(const rollout::Context& ctx,
                                   const std::vector<DatasetRecord>& dataset,
                                   const std::function<const FrameEmbeddingIndex&(
                                       const std::string&)>& index_for) {
  PipelineResult result;
  result.input_count = static_cast<int>(dataset.size());
  for (const auto& rec : dataset) {
    const FrameEmbeddingIndex& idx = index_for(rec.video.video_id);
    FilterVerdict verdict = stage1_filter(ctx, rec, idx);
    if (verdict.stage1 == Stage1Verdict::kept && !verdict.flagged())
      stage2_filter(ctx, rec, idx, verdict);

    if (verdict.flagged()) {
      ++result.flagged;
      result.kept.push_back(rec);
    } else if (verdict.stage1 == Stage1Verdict::dropped_trivial) {
      ++result.dropped_trivial;
    } else if (verdict.stage2 && *verdict.stage2 == Stage2Verdict::dropped_unsolvable) {
      ++result.dropped_unsolvable;
    } else {
      ++result.kept_count;
      result.kept.push_back(rec);
    }
    result.verdicts.push_back(std::move(verdict));
  }
  return result;
}

}  // namespace filter
}  // namespace timesearch
