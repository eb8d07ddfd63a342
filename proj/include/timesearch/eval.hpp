#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "timesearch/embedding_store.hpp"
#include "timesearch/metrics.hpp"
#include "timesearch/rollout.hpp"

namespace timesearch {
namespace metrics {

struct EvalRow {
  std::string question_id;
  int member = 0;  // line number among trajectories of the same question
  double duration_s = 0.0;
  std::optional<PRF> temporal;  // present when the question carries keyframes
  std::optional<PRF> visual;
  int qa_correct = 0;
  int completeness = 0;
  int consistency = 0;
};

inline void to_json(json& j, const EvalRow& r) {
  j = json{{"question_id", r.question_id},
           {"member", r.member},
           {"duration_s", r.duration_s},
           {"qa_correct", r.qa_correct},
           {"completeness", r.completeness},
           {"consistency", r.consistency}};
  j["temporal"] = r.temporal ? json(*r.temporal) : json(nullptr);
  j["visual"] = r.visual ? json(*r.visual) : json(nullptr);
}

inline void from_json(const json& j, EvalRow& r) {
  j.at("question_id").get_to(r.question_id);
  j.at("member").get_to(r.member);
  j.at("duration_s").get_to(r.duration_s);
  j.at("qa_correct").get_to(r.qa_correct);
  j.at("completeness").get_to(r.completeness);
  j.at("consistency").get_to(r.consistency);
  r.temporal.reset();
  if (!j.at("temporal").is_null()) r.temporal = j.at("temporal").get<PRF>();
  r.visual.reset();
  if (!j.at("visual").is_null()) r.visual = j.at("visual").get<PRF>();
}

struct EvalReport {
  std::vector<EvalRow> rows;
  std::map<std::string, double> aggregates;  // means x100 over rows with the field
  double delta = 1.0;
  std::string judge_identity;
  std::string config_hash;
  std::string template_hash;
  json config;
};

// Aggregates are plain arithmetic means of the per-row values, scaled x100.
inline std::map<std::string, double> aggregate_rows(const std::vector<EvalRow>& rows) {
  std::map<std::string, double> out;
  auto mean_of = [&rows](auto&& get) -> std::optional<double> {
    double sum = 0.0;
    int n = 0;
    for (const auto& r : rows) {
      auto v = get(r);
      if (v) {
        sum += *v;
        ++n;
      }
    }
    if (n == 0) return std::nullopt;
    return sum / n;
  };
  auto add = [&out](const char* key, std::optional<double> v) {
    if (v) out[key] = *v * 100.0;
  };
  add("temporal_p", mean_of([](const EvalRow& r) {
        return r.temporal ? std::optional<double>(r.temporal->p) : std::nullopt;
      }));
  add("temporal_r", mean_of([](const EvalRow& r) {
        return r.temporal ? std::optional<double>(r.temporal->r) : std::nullopt;
      }));
  add("temporal_f1", mean_of([](const EvalRow& r) {
        return r.temporal ? std::optional<double>(r.temporal->f1) : std::nullopt;
      }));
  add("visual_p", mean_of([](const EvalRow& r) {
        return r.visual ? std::optional<double>(r.visual->p) : std::nullopt;
      }));
  add("visual_r", mean_of([](const EvalRow& r) {
        return r.visual ? std::optional<double>(r.visual->r) : std::nullopt;
      }));
  add("visual_f1", mean_of([](const EvalRow& r) {
        return r.visual ? std::optional<double>(r.visual->f1) : std::nullopt;
      }));
  add("qa_accuracy", mean_of([](const EvalRow& r) {
        return std::optional<double>(static_cast<double>(r.qa_correct));
      }));
  add("completeness_rate", mean_of([](const EvalRow& r) {
        return std::optional<double>(static_cast<double>(r.completeness));
      }));
  add("consistency_rate", mean_of([](const EvalRow& r) {
        return std::optional<double>(static_cast<double>(r.consistency));
      }));
  return out;
}

namespace detail {

// Embedding rows for a list of timestamps: each maps to the index frame with
// the nearest timestamp.
inline Eigen::MatrixXd rows_for_timestamps(const FrameEmbeddingIndex& idx,
                                           const std::vector<double>& ts) {
  Eigen::MatrixXd out(static_cast<int>(ts.size()), idx.dim);
  for (std::size_t k = 0; k < ts.size(); ++k) {
    int best = 0;
    double best_d = std::abs(idx.timestamps[0] - ts[k]);
    for (int i = 1; i < idx.count(); ++i) {
      double d = std::abs(idx.timestamps[static_cast<std::size_t>(i)] - ts[k]);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    out.row(static_cast<int>(k)) = idx.vectors.row(best);
  }
  return out;
}

inline Eigen::MatrixXd rows_for_frames(const FrameEmbeddingIndex& idx, const FrameSet& frames) {
  Eigen::MatrixXd out(frames.size(), idx.dim);
  for (int k = 0; k < frames.size(); ++k) {
    int row = frames.frames[static_cast<std::size_t>(k)].index;
    if (row < 0 || row >= idx.count())
      throw std::runtime_error("trajectory references frame index " + std::to_string(row) +
                               " outside index " + idx.video_id);
    out.row(k) = idx.vectors.row(row);
  }
  return out;
}

// All concatenated think-text of a trajectory, for the consistency judge.
inline std::string reasoning_text(const Trajectory& t) {
  std::string out;
  for (const auto& s : t.steps) {
    if (!out.empty()) out += "\n";
    out += s.think_text;
  }
  return out;
}

}  // namespace detail

// Scores one trajectory against its question: search metrics from the dynamic
// frame set, QA correctness, the re-answer completeness check, and the
// judge-based consistency verdict.
inline EvalRow eval_trajectory(const rollout::Context& ctx, const DatasetRecord& rec,
                               const Trajectory& traj, const FrameEmbeddingIndex& idx,
                               int member) {
  const Question& q = rec.question;
  EvalRow row;
  row.question_id = q.id;
  row.member = member;
  row.duration_s = rec.video.duration_s;

  FrameSet dynamic = protocol::extract_dynamic_frameset(traj);

  if (q.gt_keyframes && !q.gt_keyframes->empty()) {
    row.temporal = temporal_prf(dynamic.timestamps(), *q.gt_keyframes, ctx.cfg->delta);
    row.visual = visual_prf(detail::rows_for_frames(idx, dynamic),
                            detail::rows_for_timestamps(idx, *q.gt_keyframes));
  }

  // QA correctness of the trajectory's final answer.
  if (traj.final_answer) {
    if (q.kind == QuestionKind::mcq) {
      row.qa_correct = reward::accuracy_mcq(*traj.final_answer, q);
    } else {
      row.qa_correct =
          reward::accuracy_open(*ctx.judge, *traj.final_answer, q, *ctx.prompts, *ctx.cfg).score;
    }
  }

  // Completeness: re-answer from the dynamic frames with search disallowed.
  rollout::CsvRecord csv = rollout::run_csv(ctx, q, dynamic);
  if (!csv.violation && !csv.flagged) {
    if (q.kind == QuestionKind::mcq) {
      row.completeness = reward::accuracy_mcq(csv.answer, q);
    } else {
      row.completeness =
          reward::accuracy_open(*ctx.judge, csv.answer, q, *ctx.prompts, *ctx.cfg).score;
    }
  }

  // Consistency: judge whether the reasoning supports the final answer.
  client::ChatRequest jreq;
  jreq.max_tokens = ctx.cfg->max_completion_length;
  jreq.temperature = 0.0;
  jreq.tools_enabled = false;
  jreq.meta = {q.id, client::Phase::judge, 0};
  Message jm;
  jm.role = Role::user;
  jm.text = render_template(ctx.prompts->consistency,
                            {{"question", q.text},
                             {"reasoning", detail::reasoning_text(traj)},
                             {"answer", traj.final_answer.value_or("")}});
  jreq.messages.push_back(jm);
  try {
    row.consistency = consistency_score(ctx.judge->chat(jreq).text);
  } catch (const client::TransportError&) {
    row.consistency = 0;
  }
  return row;
}

inline EvalReport run_eval(const rollout::Context& ctx, const std::vector<DatasetRecord>& dataset,
                           const std::vector<Trajectory>& trajectories, IndexCache& indexes) {
  std::map<std::string, const DatasetRecord*> by_id;
  for (const auto& r : dataset) by_id[r.question.id] = &r;

  EvalReport report;
  report.delta = ctx.cfg->delta;
  report.judge_identity = ctx.judge ? ctx.judge->identity() : "";
  report.config_hash = config_hash(*ctx.cfg);
  report.template_hash = template_hash(*ctx.prompts);
  to_json(report.config, *ctx.cfg);

  std::map<std::string, int> member_count;
  for (const auto& traj : trajectories) {
    auto it = by_id.find(traj.question_id);
    if (it == by_id.end())
      throw std::runtime_error("trajectory references unknown question " + traj.question_id);
    const DatasetRecord& rec = *it->second;
    const FrameEmbeddingIndex& idx = indexes.get(rec.video.video_id);
    report.rows.push_back(
        eval_trajectory(ctx, rec, traj, idx, member_count[traj.question_id]++));
  }
  report.aggregates = aggregate_rows(report.rows);
  return report;
}

inline void to_json(json& j, const EvalReport& r) {
  j = json{{"rows", r.rows},
           {"aggregates", r.aggregates},
           {"delta", r.delta},
           {"judge", r.judge_identity},
           {"config_hash", r.config_hash},
           {"template_hash", r.template_hash},
           {"config", r.config}};
}

inline void from_json(const json& j, EvalReport& r) {
  r.rows = j.at("rows").get<std::vector<EvalRow>>();
  r.aggregates = j.at("aggregates").get<std::map<std::string, double>>();
  j.at("delta").get_to(r.delta);
  j.at("judge").get_to(r.judge_identity);
  j.at("config_hash").get_to(r.config_hash);
  j.at("template_hash").get_to(r.template_hash);
  r.config = j.at("config");
}

// Plot-ready CSV: aggregate metrics per video-duration bucket.
inline std::string report_to_bucket_csv(const EvalReport& report) {
  struct Bucket {
    const char* label;
    double lo, hi;
  };
  const Bucket buckets[] = {{"lt1m", 0.0, 60.0},
                            {"1-15m", 60.0, 900.0},
                            {"15-30m", 900.0, 1800.0},
                            {"30-60m", 1800.0, 3600.0},
                            {"gt60m", 3600.0, 1e18}};
  std::string out =
      "bucket,rows,temporal_f1,visual_f1,qa_accuracy,completeness_rate,consistency_rate\n";
  for (const auto& b : buckets) {
    std::vector<EvalRow> rows;
    for (const auto& r : report.rows)
      if (r.duration_s >= b.lo && r.duration_s < b.hi) rows.push_back(r);
    auto agg = aggregate_rows(rows);
    auto cell = [&agg](const char* key) {
      auto it = agg.find(key);
      return it == agg.end() ? std::string() : format_number(it->second);
    };
    out += std::string(b.label) + "," + std::to_string(rows.size()) + "," + cell("temporal_f1") +
           "," + cell("visual_f1") + "," + cell("qa_accuracy") + "," + cell("completeness_rate") +
           "," + cell("consistency_rate") + "\n";
  }
  return out;
}

}  // namespace metrics
}  // namespace timesearch
