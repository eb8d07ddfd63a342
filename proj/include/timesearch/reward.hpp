#pragma once

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "timesearch/core.hpp"
#include "timesearch/model_client.hpp"
#include "timesearch/protocol.hpp"

namespace timesearch {
namespace reward {

// Binary trajectory-level format score.
inline double format_reward(const Trajectory& t) {
  return protocol::format_valid(t) ? 1.0 : 0.0;
}

// Exact match of the extracted option letter against the gold letter.
inline int accuracy_mcq(const std::string& answer_text, const Question& q) {
  if (q.kind != QuestionKind::mcq)
    throw std::invalid_argument("accuracy_mcq: question " + q.id + " is not multiple choice");
  auto letter = protocol::extract_answer_letter(answer_text, q.option_letters());
  return letter && *letter == q.gold_answer ? 1 : 0;
}

// Binary verdict from a judge response: the <answer> block when present,
// otherwise the whole text; "yes" scores 1, anything else 0.
inline int parse_binary_verdict(const std::string& text) {
  std::string inner = protocol::strip_answer_tags(text);
  if (inner.size() >= 3) {
    std::string head = inner.substr(0, 3);
    for (auto& c : head) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (head == "yes" && (inner.size() == 3 || !std::isalnum(static_cast<unsigned char>(inner[3]))))
      return 1;
  }
  return 0;
}

struct JudgeOutcome {
  int score = 0;
  std::string raw;      // verbatim judge output, persisted for offline re-scoring
  bool flagged = false; // transport failure; scored 0
};

// Semantic-agreement judgement for open-ended answers.
inline JudgeOutcome accuracy_open(client::ChatClient& judge, const std::string& answer_text,
                                  const Question& q, const PromptSet& prompts,
                                  const HarnessConfig& cfg) {
  if (q.kind != QuestionKind::open)
    throw std::invalid_argument("accuracy_open: question " + q.id + " is not open-ended");
  client::ChatRequest req;
  req.max_tokens = cfg.max_completion_length;
  req.temperature = 0.0;
  req.tools_enabled = false;
  req.meta = {q.id, client::Phase::judge, 0};
  Message m;
  m.role = Role::user;
  m.text = render_template(prompts.judge_accuracy, {{"question", q.text},
                                                    {"gold", q.gold_answer},
                                                    {"candidate", answer_text}});
  req.messages.push_back(m);

  JudgeOutcome out;
  try {
    out.raw = judge.chat(req).text;
    out.score = parse_binary_verdict(out.raw);
  } catch (const client::TransportError&) {
    out.score = 0;
    out.flagged = true;
  }
  return out;
}

// Completeness gate: the re-answer counts only when the original answer was
// already correct.
inline int completeness_reward(int acc_answer, int acc_csv) {
  if ((acc_answer != 0 && acc_answer != 1) || (acc_csv != 0 && acc_csv != 1))
    throw std::invalid_argument("completeness_reward: inputs must be 0 or 1");
  return (acc_answer > 0) ? acc_csv : 0;
}

inline RewardBreakdown total_reward(int rc, int rfmt, int racc) {
  auto binary = [](int v) { return v == 0 || v == 1; };
  if (!binary(rc) || !binary(rfmt) || !binary(racc))
    throw std::invalid_argument("total_reward: components must be 0 or 1");
  RewardBreakdown r;
  r.completeness = rc;
  r.format = rfmt;
  r.accuracy = racc;
  r.total = r.completeness + r.format + r.accuracy;
  validate(r);
  return r;
}

struct AdvantageVector {
  std::vector<double> values;  // mean zero
  bool scale_applied = false;
};

// Group-relative advantages: mean-centered rewards, optionally divided by the
// population standard deviation. A constant reward vector always yields
// exactly zero advantages (no learning signal in the group).
inline AdvantageVector group_advantages(const std::vector<double>& rewards, bool scale) {
  const std::size_t n = rewards.size();
  if (n < 2) throw std::invalid_argument("group_advantages: need at least 2 rewards");

  AdvantageVector out;
  out.values.assign(n, 0.0);

  const auto [lo, hi] = std::minmax_element(rewards.begin(), rewards.end());
  if (*lo == *hi) return out;  // degenerate group

  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) /
                      static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) out.values[i] = rewards[i] - mean;

  if (scale) {
    double var = 0.0;
    for (double v : out.values) var += v * v;
    var /= static_cast<double>(n);
    const double sd = std::sqrt(var);
    if (sd < 1e-9) {
      std::fill(out.values.begin(), out.values.end(), 0.0);
      return out;
    }
    for (double& v : out.values) v /= sd;
    out.scale_applied = true;
  }
  return out;
}

}  // namespace reward
}  // namespace timesearch
