#pragma once

#include <json.hpp>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "timesearch/util.hpp"

namespace timesearch {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Video & question metadata
// ---------------------------------------------------------------------------

enum class QuestionKind { mcq, open };

inline std::string to_string(QuestionKind k) {
  return k == QuestionKind::mcq ? "mcq" : "open";
}

inline QuestionKind question_kind_from(const std::string& s) {
  if (s == "mcq") return QuestionKind::mcq;
  if (s == "open") return QuestionKind::open;
  throw std::invalid_argument("unknown question kind: " + s);
}

struct VideoSource {
  std::string video_id;
  double duration_s = 0.0;
  double fps = 0.0;

  friend bool operator==(const VideoSource&, const VideoSource&) = default;
};

inline void validate(const VideoSource& v) {
  if (v.video_id.empty()) throw std::invalid_argument("VideoSource: empty video_id");
  if (!(v.duration_s > 0.0)) throw std::invalid_argument("VideoSource: duration_s must be > 0");
  if (!(v.fps > 0.0)) throw std::invalid_argument("VideoSource: fps must be > 0");
}

inline void to_json(json& j, const VideoSource& v) {
  j = json{{"video_id", v.video_id}, {"duration_s", v.duration_s}, {"fps", v.fps}};
}

inline void from_json(const json& j, VideoSource& v) {
  j.at("video_id").get_to(v.video_id);
  j.at("duration_s").get_to(v.duration_s);
  j.at("fps").get_to(v.fps);
  validate(v);
}

struct McqOption {
  std::string letter;  // single character, A-Z
  std::string text;

  friend bool operator==(const McqOption&, const McqOption&) = default;
};

struct Question {
  std::string id;
  std::string video_id;
  std::string text;
  QuestionKind kind = QuestionKind::open;
  std::vector<McqOption> options;  // nonempty iff kind == mcq
  std::string gold_answer;
  std::optional<std::vector<double>> gt_keyframes;

  std::vector<std::string> option_letters() const {
    std::vector<std::string> out;
    out.reserve(options.size());
    for (const auto& o : options) out.push_back(o.letter);
    return out;
  }

  friend bool operator==(const Question&, const Question&) = default;
};

inline void validate(const Question& q) {
  if (q.id.empty()) throw std::invalid_argument("Question: empty id");
  if (q.video_id.empty()) throw std::invalid_argument("Question: empty video_id");
  if (q.kind == QuestionKind::mcq) {
    if (q.options.empty()) throw std::invalid_argument("Question " + q.id + ": mcq without options");
    std::vector<std::string> seen;
    bool gold_found = false;
    for (const auto& o : q.options) {
      if (o.letter.size() != 1 || o.letter[0] < 'A' || o.letter[0] > 'Z')
        throw std::invalid_argument("Question " + q.id + ": option letter must be a single A-Z character");
      for (const auto& s : seen)
        if (s == o.letter)
          throw std::invalid_argument("Question " + q.id + ": duplicate option letter " + o.letter);
      seen.push_back(o.letter);
      if (o.letter == q.gold_answer) gold_found = true;
    }
    if (!gold_found)
      throw std::invalid_argument("Question " + q.id + ": gold answer is not an option letter");
  }
  if (q.gt_keyframes) {
    for (double t : *q.gt_keyframes)
      if (!(t >= 0.0) || std::isnan(t))
        throw std::invalid_argument("Question " + q.id + ": negative gt keyframe");
  }
}

inline void to_json(json& j, const Question& q) {
  j = json{{"id", q.id},
           {"video_id", q.video_id},
           {"question", q.text},
           {"kind", to_string(q.kind)},
           {"answer", q.gold_answer}};
  if (!q.options.empty()) {
    json opts = json::array();
    for (const auto& o : q.options) opts.push_back(json::array({o.letter, o.text}));
    j["options"] = opts;
  }
  if (q.gt_keyframes) j["gt_keyframes"] = *q.gt_keyframes;
}

inline void from_json(const json& j, Question& q) {
  j.at("id").get_to(q.id);
  j.at("video_id").get_to(q.video_id);
  j.at("question").get_to(q.text);
  q.kind = question_kind_from(j.at("kind").get<std::string>());
  q.options.clear();
  if (j.contains("options")) {
    for (const auto& o : j.at("options"))
      q.options.push_back(McqOption{o.at(0).get<std::string>(), o.at(1).get<std::string>()});
  }
  j.at("answer").get_to(q.gold_answer);
  q.gt_keyframes.reset();
  if (j.contains("gt_keyframes") && !j.at("gt_keyframes").is_null())
    q.gt_keyframes = j.at("gt_keyframes").get<std::vector<double>>();
  validate(q);
}

// One dataset JSONL line bundles a question with its video metadata.
struct DatasetRecord {
  Question question;
  VideoSource video;

  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

inline void validate(const DatasetRecord& r) {
  validate(r.video);
  validate(r.question);
  if (r.question.video_id != r.video.video_id)
    throw std::invalid_argument("DatasetRecord: question/video id mismatch");
  if (r.question.gt_keyframes) {
    for (double t : *r.question.gt_keyframes)
      if (t > r.video.duration_s)
        throw std::invalid_argument("Question " + r.question.id + ": gt keyframe beyond video duration");
  }
}

inline void to_json(json& j, const DatasetRecord& r) {
  to_json(j, r.question);
  j["duration_s"] = r.video.duration_s;
  j["fps"] = r.video.fps;
}

inline void from_json(const json& j, DatasetRecord& r) {
  from_json(j, r.question);
  r.video.video_id = r.question.video_id;
  j.at("duration_s").get_to(r.video.duration_s);
  j.at("fps").get_to(r.video.fps);
  validate(r);
}

// ---------------------------------------------------------------------------
// Frames and trajectories
// ---------------------------------------------------------------------------

struct FrameRef {
  std::string video_id;
  double timestamp_s = 0.0;
  int index = 0;  // row of the owning embedding index

  friend bool operator==(const FrameRef&, const FrameRef&) = default;
};

inline void to_json(json& j, const FrameRef& f) {
  j = json{{"video_id", f.video_id}, {"timestamp_s", f.timestamp_s}, {"index", f.index}};
}

inline void from_json(const json& j, FrameRef& f) {
  j.at("video_id").get_to(f.video_id);
  j.at("timestamp_s").get_to(f.timestamp_s);
  j.at("index").get_to(f.index);
}

struct FrameSet {
  std::vector<FrameRef> frames;  // ascending timestamps, unique indices

  bool empty() const { return frames.empty(); }
  int size() const { return static_cast<int>(frames.size()); }

  std::vector<double> timestamps() const {
    std::vector<double> out;
    out.reserve(frames.size());
    for (const auto& f : frames) out.push_back(f.timestamp_s);
    return out;
  }

  std::vector<int> indices() const {
    std::vector<int> out;
    out.reserve(frames.size());
    for (const auto& f : frames) out.push_back(f.index);
    return out;
  }

  friend bool operator==(const FrameSet&, const FrameSet&) = default;
};

inline void validate(const FrameSet& s) {
  for (std::size_t i = 1; i < s.frames.size(); ++i) {
    if (s.frames[i].timestamp_s < s.frames[i - 1].timestamp_s)
      throw std::invalid_argument("FrameSet: timestamps not ascending");
  }
  for (std::size_t i = 0; i < s.frames.size(); ++i)
    for (std::size_t k = i + 1; k < s.frames.size(); ++k)
      if (s.frames[i].index == s.frames[k].index)
        throw std::invalid_argument("FrameSet: duplicate frame index");
}

inline void to_json(json& j, const FrameSet& s) { j = s.frames; }

inline void from_json(const json& j, FrameSet& s) {
  s.frames = j.get<std::vector<FrameRef>>();
  validate(s);
}

// A search request as executed by the environment. Bounds are stored after
// clamping to [0, duration]; a degenerate clamped window (start >= end) is
// legal here and yields an empty result.
struct ToolCall {
  double start_s = 0.0;
  double end_s = 0.0;
  std::string query;
  int frame_budget = 0;

  friend bool operator==(const ToolCall&, const ToolCall&) = default;
};

inline void validate(const ToolCall& c, int max_frames_per_search = 8) {
  if (c.start_s < 0.0 || c.end_s < 0.0) throw std::invalid_argument("ToolCall: negative bound");
  if (c.frame_budget < 1) throw std::invalid_argument("ToolCall: frame_budget must be >= 1");
  if (c.frame_budget > max_frames_per_search)
    throw std::invalid_argument("ToolCall: frame_budget exceeds per-search cap");
}

inline void to_json(json& j, const ToolCall& c) {
  j = json{{"start_s", c.start_s}, {"end_s", c.end_s}, {"query", c.query},
           {"frame_budget", c.frame_budget}};
}

inline void from_json(const json& j, ToolCall& c) {
  j.at("start_s").get_to(c.start_s);
  j.at("end_s").get_to(c.end_s);
  j.at("query").get_to(c.query);
  j.at("frame_budget").get_to(c.frame_budget);
}

// Either a search request or a final answer.
using StepAction = std::variant<ToolCall, std::string>;

struct Step {
  std::string think_text;
  StepAction action;
  std::optional<FrameSet> env_response;  // present iff the call was executed

  bool is_tool_call() const { return std::holds_alternative<ToolCall>(action); }
  bool is_answer() const { return std::holds_alternative<std::string>(action); }
  const ToolCall& tool_call() const { return std::get<ToolCall>(action); }
  const std::string& answer() const { return std::get<std::string>(action); }

  friend bool operator==(const Step&, const Step&) = default;
};

inline void validate(const Step& s) {
  if (s.env_response && !s.is_tool_call())
    throw std::invalid_argument("Step: env_response on a non-tool-call step");
}

inline void to_json(json& j, const Step& s) {
  json action;
  if (s.is_tool_call()) {
    to_json(action, s.tool_call());
    action["type"] = "tool_call";
  } else {
    action = json{{"type", "answer"}, {"text", s.answer()}};
  }
  j = json{{"think_text", s.think_text}, {"action", action}};
  if (s.env_response)
    j["env_response"] = *s.env_response;
  else
    j["env_response"] = nullptr;
}

inline void from_json(const json& j, Step& s) {
  j.at("think_text").get_to(s.think_text);
  const json& action = j.at("action");
  std::string type = action.at("type").get<std::string>();
  if (type == "tool_call") {
    ToolCall c;
    from_json(action, c);
    s.action = c;
  } else if (type == "answer") {
    s.action = action.at("text").get<std::string>();
  } else {
    throw std::invalid_argument("Step: unknown action type " + type);
  }
  s.env_response.reset();
  if (j.contains("env_response") && !j.at("env_response").is_null())
    s.env_response = j.at("env_response").get<FrameSet>();
  validate(s);
}

enum class TerminationReason { answer, turn_budget, format_error };

inline std::string to_string(TerminationReason r) {
  switch (r) {
    case TerminationReason::answer: return "answer";
    case TerminationReason::turn_budget: return "turn_budget";
    case TerminationReason::format_error: return "format_error";
  }
  return "format_error";
}

inline TerminationReason termination_from(const std::string& s) {
  if (s == "answer") return TerminationReason::answer;
  if (s == "turn_budget") return TerminationReason::turn_budget;
  if (s == "format_error") return TerminationReason::format_error;
  throw std::invalid_argument("unknown termination reason: " + s);
}

struct Trajectory {
  std::string question_id;
  FrameSet preview;  // uniformly sampled initial frames
  std::vector<Step> steps;
  std::optional<std::string> final_answer;
  TerminationReason terminated_by = TerminationReason::format_error;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

inline void validate(const Trajectory& t, int max_search_turns = 8) {
  validate(t.preview);
  int searches = 0;
  bool answered = false;
  for (const auto& s : t.steps) {
    validate(s);
    if (answered) throw std::invalid_argument("Trajectory: step after answer step");
    if (s.is_tool_call()) ++searches;
    if (s.is_answer()) answered = true;
  }
  if (searches > max_search_turns)
    throw std::invalid_argument("Trajectory: more tool-call steps than the search budget");
}

inline void to_json(json& j, const Trajectory& t) {
  j = json{{"question_id", t.question_id},
           {"preview", t.preview},
           {"steps", t.steps},
           {"terminated_by", to_string(t.terminated_by)}};
  if (t.final_answer)
    j["final_answer"] = *t.final_answer;
  else
    j["final_answer"] = nullptr;
}

inline void from_json(const json& j, Trajectory& t) {
  j.at("question_id").get_to(t.question_id);
  t.preview = j.at("preview").get<FrameSet>();
  t.steps = j.at("steps").get<std::vector<Step>>();
  t.final_answer.reset();
  if (j.contains("final_answer") && !j.at("final_answer").is_null())
    t.final_answer = j.at("final_answer").get<std::string>();
  t.terminated_by = termination_from(j.at("terminated_by").get<std::string>());
  validate(t, 1 << 20);  // structural checks only; the budget is enforced at rollout time
}

// ---------------------------------------------------------------------------
// Rewards
// ---------------------------------------------------------------------------

struct RewardBreakdown {
  double completeness = 0.0;
  double format = 0.0;
  double accuracy = 0.0;
  double total = 0.0;

  friend bool operator==(const RewardBreakdown&, const RewardBreakdown&) = default;
};

inline void validate(const RewardBreakdown& r) {
  auto binary = [](double v) { return v == 0.0 || v == 1.0; };
  if (!binary(r.completeness) || !binary(r.format) || !binary(r.accuracy))
    throw std::invalid_argument("RewardBreakdown: components must be 0 or 1");
  if (r.total != r.completeness + r.format + r.accuracy)
    throw std::invalid_argument("RewardBreakdown: total is not the component sum");
  if (r.completeness == 1.0 && r.accuracy != 1.0)
    throw std::invalid_argument("RewardBreakdown: completeness without accuracy");
}

inline void to_json(json& j, const RewardBreakdown& r) {
  j = json{{"completeness", r.completeness},
           {"format", r.format},
           {"accuracy", r.accuracy},
           {"total", r.total}};
}

inline void from_json(const json& j, RewardBreakdown& r) {
  j.at("completeness").get_to(r.completeness);
  j.at("format").get_to(r.format);
  j.at("accuracy").get_to(r.accuracy);
  j.at("total").get_to(r.total);
  validate(r);
}

struct GroupConfig {
  int group_size = 8;
  bool scale_rewards = false;
  double kl_beta = 0.005;  // recorded for the external trainer only

  friend bool operator==(const GroupConfig&, const GroupConfig&) = default;
};

inline void validate(const GroupConfig& g) {
  if (g.group_size < 2) throw std::invalid_argument("GroupConfig: group_size must be >= 2");
}

inline void to_json(json& j, const GroupConfig& g) {
  j = json{{"group_size", g.group_size},
           {"scale_rewards", g.scale_rewards},
           {"kl_beta", g.kl_beta}};
}

inline void from_json(const json& j, GroupConfig& g) {
  j.at("group_size").get_to(g.group_size);
  j.at("scale_rewards").get_to(g.scale_rewards);
  j.at("kl_beta").get_to(g.kl_beta);
  validate(g);
}

// ---------------------------------------------------------------------------
// Transcript messages
// ---------------------------------------------------------------------------

enum class Role { system, user, assistant, environment };

inline std::string to_string(Role r) {
  switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
    case Role::environment: return "environment";
  }
  return "user";
}

inline Role role_from(const std::string& s) {
  if (s == "system") return Role::system;
  if (s == "user") return Role::user;
  if (s == "assistant") return Role::assistant;
  if (s == "environment") return Role::environment;
  throw std::invalid_argument("unknown role: " + s);
}

// Marker inside message text where an attached frame sits. Harness-authored
// messages are the only ones carrying frames, so no collision with model text.
inline constexpr const char* kFrameMarker = "<frame>";

struct Message {
  Role role = Role::user;
  std::string text;                // contains one kFrameMarker per frame
  std::vector<FrameRef> frames;    // in marker order

  friend bool operator==(const Message&, const Message&) = default;
};

inline void to_json(json& j, const Message& m) {
  json frames = json::array();
  for (const auto& f : m.frames)
    frames.push_back(json{{"timestamp_s", f.timestamp_s}, {"index", f.index}});
  j = json{{"role", to_string(m.role)}, {"text", m.text}, {"frames", frames}};
}

inline void from_json(const json& j, Message& m) {
  m.role = role_from(j.at("role").get<std::string>());
  j.at("text").get_to(m.text);
  m.frames.clear();
  for (const auto& f : j.at("frames")) {
    FrameRef ref;
    f.at("timestamp_s").get_to(ref.timestamp_s);
    f.at("index").get_to(ref.index);
    m.frames.push_back(ref);
  }
}

// ---------------------------------------------------------------------------
// Dataset JSONL IO
// ---------------------------------------------------------------------------

inline bool is_header_line(const json& j) { return j.is_object() && j.contains("_header"); }

inline std::vector<DatasetRecord> load_dataset(const std::string& path) {
  std::vector<DatasetRecord> out;
  std::string content = read_file(path);
  for (const auto& line : split_lines(content)) {
    std::string t = trim(line);
    if (t.empty()) continue;
    json j = json::parse(t);
    if (is_header_line(j)) continue;
    out.push_back(j.get<DatasetRecord>());
  }
  return out;
}

inline void save_dataset(const std::string& path, const std::vector<DatasetRecord>& records,
                         const json& header = json()) {
  std::ostringstream ss;
  if (!header.is_null()) ss << json{{"_header", header}}.dump() << "\n";
  for (const auto& r : records) {
    json j;
    to_json(j, r);
    ss << j.dump() << "\n";
  }
  write_file(path, ss.str());
}

}  // namespace timesearch
