#pragma once

#include <algorithm>
#include <cctype>
#include <optional>
#include <string>
#include <vector>

#include "timesearch/core.hpp"
#include "timesearch/prompts.hpp"

namespace timesearch {
namespace protocol {

enum class Violation {
  missing_think,
  bad_tags,
  bad_json,
  both_actions,
  neither_action,
  extra_trailing,
};

inline std::string to_string(Violation v) {
  switch (v) {
    case Violation::missing_think: return "missing_think";
    case Violation::bad_tags: return "bad_tags";
    case Violation::bad_json: return "bad_json";
    case Violation::both_actions: return "both_actions";
    case Violation::neither_action: return "neither_action";
    case Violation::extra_trailing: return "extra_trailing";
  }
  return "bad_tags";
}

// Result of parsing one assistant turn. Violations are data, not errors.
struct TurnParse {
  std::string raw;
  std::string think_text;
  std::optional<StepAction> action;
  bool format_ok = false;
  std::optional<Violation> violation;

  bool is_tool_call() const { return action && std::holds_alternative<ToolCall>(*action); }
  bool is_answer() const { return action && std::holds_alternative<std::string>(*action); }
  const ToolCall& tool_call() const { return std::get<ToolCall>(*action); }
  const std::string& answer() const { return std::get<std::string>(*action); }
};

namespace detail {

struct Block {
  std::string body;
  std::size_t open_pos = std::string::npos;
  std::size_t end_pos = std::string::npos;  // one past the close tag
  bool found = false;
  bool closed = false;
};

inline Block find_block(const std::string& text, const std::string& tag, std::size_t from = 0) {
  Block b;
  const std::string open = "<" + tag + ">";
  const std::string close = "</" + tag + ">";
  b.open_pos = text.find(open, from);
  if (b.open_pos == std::string::npos) return b;
  b.found = true;
  std::size_t body_start = b.open_pos + open.size();
  std::size_t close_pos = text.find(close, body_start);
  if (close_pos == std::string::npos) return b;
  b.closed = true;
  b.body = text.substr(body_start, close_pos - body_start);
  b.end_pos = close_pos + close.size();
  return b;
}

inline bool whitespace_only(const std::string& s, std::size_t from, std::size_t to) {
  for (std::size_t i = from; i < to && i < s.size(); ++i)
    if (!std::isspace(static_cast<unsigned char>(s[i]))) return false;
  return true;
}

// Bounds may arrive as numbers or numeric strings.
inline bool numeric_field(const json& j, const char* key, double& out) {
  if (!j.contains(key)) return false;
  const json& v = j.at(key);
  if (v.is_number()) {
    out = v.get<double>();
    return true;
  }
  if (v.is_string()) {
    const std::string s = trim(v.get<std::string>());
    if (s.empty()) return false;
    char* end = nullptr;
    double d = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) return false;
    out = d;
    return true;
  }
  return false;
}

}  // namespace detail

// Accepts exactly <think>...</think><tool_call>{json}</tool_call> or
// <think>...</think><answer>...</answer>, whitespace-tolerant between blocks.
// Anything else comes back with the specific violation.
inline TurnParse parse_turn(const std::string& text) {
  TurnParse out;
  out.raw = text;

  auto fail = [&out](Violation v) -> TurnParse {
    out.format_ok = false;
    out.violation = v;
    out.action.reset();
    return out;
  };

  detail::Block think = detail::find_block(text, "think");
  if (!think.found || !detail::whitespace_only(text, 0, think.open_pos))
    return fail(Violation::missing_think);
  if (!think.closed) return fail(Violation::bad_tags);
  out.think_text = think.body;

  const bool has_tool = text.find("<tool_call>", think.end_pos) != std::string::npos;
  const bool has_answer = text.find("<answer>", think.end_pos) != std::string::npos;
  if (has_tool && has_answer) return fail(Violation::both_actions);
  if (!has_tool && !has_answer) return fail(Violation::neither_action);

  detail::Block action =
      detail::find_block(text, has_tool ? "tool_call" : "answer", think.end_pos);
  if (!action.closed) return fail(Violation::bad_tags);
  if (!detail::whitespace_only(text, think.end_pos, action.open_pos) ||
      !detail::whitespace_only(text, action.end_pos, text.size()))
    return fail(Violation::extra_trailing);

  if (has_tool) {
    json j = json::parse(trim(action.body), nullptr, false);
    if (j.is_discarded() || !j.is_object()) return fail(Violation::bad_json);
    ToolCall call;
    if (!detail::numeric_field(j, "start", call.start_s) ||
        !detail::numeric_field(j, "end", call.end_s))
      return fail(Violation::bad_json);
    if (!j.contains("query") || !j.at("query").is_string()) return fail(Violation::bad_json);
    call.query = j.at("query").get<std::string>();
    // The frame budget is owned by the harness config, not the model.
    call.frame_budget = 0;
    out.action = call;
  } else {
    out.action = action.body;
  }
  out.format_ok = true;
  return out;
}

inline std::string render_turn(const std::string& think, const ToolCall& call) {
  json j{{"start", call.start_s}, {"end", call.end_s}, {"query", call.query}};
  return "<think>" + think + "</think><tool_call>" + j.dump() + "</tool_call>";
}

inline std::string render_turn(const std::string& think, const std::string& answer) {
  return "<think>" + think + "</think><answer>" + answer + "</answer>";
}

// First standalone A-Z letter (case-insensitive) that names one of the
// options: "B", "(b)", "B." all resolve to B. Returns the canonical letter.
inline std::optional<std::string> extract_answer_letter(const std::string& text,
                                                        const std::vector<std::string>& letters) {
  auto alnum = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (!std::isalpha(static_cast<unsigned char>(c))) continue;
    const bool left_ok = i == 0 || !alnum(text[i - 1]);
    const bool right_ok = i + 1 == text.size() || !alnum(text[i + 1]);
    if (!left_ok || !right_ok) continue;
    std::string letter(1, static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    if (std::find(letters.begin(), letters.end(), letter) != letters.end()) return letter;
  }
  return std::nullopt;
}

// Inner text of the first <answer> block if present, else the trimmed whole.
inline std::string strip_answer_tags(const std::string& text) {
  detail::Block b = detail::find_block(text, "answer");
  if (b.found && b.closed) return trim(b.body);
  return trim(text);
}

// Environment message for a search result: per frame, a "%.1fs" timestamp
// token immediately before the frame slot. An empty result renders the
// retry instruction instead.
inline Message render_search_response(const FrameSet& frames, const PromptSet& prompts) {
  Message msg;
  msg.role = Role::environment;
  if (frames.empty()) {
    msg.text = prompts.search_response_empty;
    return msg;
  }
  std::string body;
  for (std::size_t i = 0; i < frames.frames.size(); ++i) {
    if (i > 0) body += "\n";
    body += format_timestamp(frames.frames[i].timestamp_s);
    body += kFrameMarker;
  }
  msg.text = render_template(prompts.search_response, {{"frames", body}});
  msg.frames = frames.frames;
  return msg;
}

// Union of all executed search results, deduplicated by frame index and
// sorted by timestamp. The preview is deliberately not part of it.
inline FrameSet extract_dynamic_frameset(const Trajectory& t) {
  std::vector<FrameRef> all;
  for (const auto& step : t.steps)
    if (step.env_response)
      all.insert(all.end(), step.env_response->frames.begin(), step.env_response->frames.end());
  std::sort(all.begin(), all.end(), [](const FrameRef& a, const FrameRef& b) {
    if (a.timestamp_s != b.timestamp_s) return a.timestamp_s < b.timestamp_s;
    return a.index < b.index;
  });
  FrameSet out;
  std::vector<int> seen;
  for (const auto& f : all) {
    if (std::find(seen.begin(), seen.end(), f.index) != seen.end()) continue;
    seen.push_back(f.index);
    out.frames.push_back(f);
  }
  return out;
}

// Structural validity of a whole trajectory. Steps only exist for well-formed
// turns, so any violation surfaces as a format_error termination; exhausting
// the turn budget without answering keeps structural validity.
inline bool format_valid(const Trajectory& t) {
  return !t.steps.empty() && t.terminated_by != TerminationReason::format_error;
}

enum class SessionStatus { active, answered, exhausted, format_failed };

inline std::string to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::active: return "active";
    case SessionStatus::answered: return "answered";
    case SessionStatus::exhausted: return "exhausted";
    case SessionStatus::format_failed: return "format_failed";
  }
  return "active";
}

// One interactive rollout session. Owned by exactly one task.
struct SessionState {
  Question question;
  FrameSet preview;
  std::vector<Message> transcript;
  int turns_used = 0;
  int search_calls_used = 0;
  int max_search_turns = 8;
  SessionStatus status = SessionStatus::active;

  std::vector<Step> steps;
  std::optional<std::string> final_answer;

  bool can_search() const { return search_calls_used < max_search_turns; }
};

// Applies one parsed assistant turn. `search_result` must be the executed
// search output when the turn is an in-budget tool call; the caller decides
// execution via can_search(). A tool call past the budget terminates the
// session without executing and without recording a step.
inline void advance(SessionState& state, const TurnParse& turn,
                    std::optional<FrameSet> search_result, const PromptSet& prompts) {
  if (state.status != SessionStatus::active)
    throw std::logic_error("advance: session is not active");

  ++state.turns_used;
  Message assistant{Role::assistant, turn.raw, {}};

  if (!turn.format_ok) {
    state.transcript.push_back(assistant);
    state.status = SessionStatus::format_failed;
    return;
  }
  if (turn.is_answer()) {
    state.transcript.push_back(assistant);
    state.steps.push_back(Step{turn.think_text, *turn.action, std::nullopt});
    state.final_answer = trim(turn.answer());
    state.status = SessionStatus::answered;
    return;
  }
  // Tool call.
  if (!state.can_search()) {
    state.transcript.push_back(assistant);
    state.status = SessionStatus::exhausted;
    return;
  }
  if (!search_result)
    throw std::logic_error("advance: in-budget tool call without an executed search result");
  state.transcript.push_back(assistant);
  state.steps.push_back(Step{turn.think_text, *turn.action, *search_result});
  state.transcript.push_back(render_search_response(*search_result, prompts));
  ++state.search_calls_used;
}

inline Trajectory to_trajectory(const SessionState& state) {
  Trajectory t;
  t.question_id = state.question.id;
  t.preview = state.preview;
  t.steps = state.steps;
  t.final_answer = state.final_answer;
  switch (state.status) {
    case SessionStatus::answered: t.terminated_by = TerminationReason::answer; break;
    case SessionStatus::exhausted: t.terminated_by = TerminationReason::turn_budget; break;
    default: t.terminated_by = TerminationReason::format_error; break;
  }
  return t;
}

}  // namespace protocol
}  // namespace timesearch
