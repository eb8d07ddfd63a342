#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "timesearch/core.hpp"
#include "timesearch/protocol.hpp"

namespace timesearch {
namespace metrics {

struct PRF {
  double p = 0.0;
  double r = 0.0;
  double f1 = 0.0;

  friend bool operator==(const PRF&, const PRF&) = default;
};

inline PRF make_prf(double p, double r) {
  PRF out;
  out.p = p;
  out.r = r;
  out.f1 = (p + r > 0.0) ? 2.0 * p * r / (p + r) : 0.0;
  return out;
}

inline void to_json(json& j, const PRF& v) { j = json{{"p", v.p}, {"r", v.r}, {"f1", v.f1}}; }

inline void from_json(const json& j, PRF& v) {
  j.at("p").get_to(v.p);
  j.at("r").get_to(v.r);
  j.at("f1").get_to(v.f1);
}

// One-to-one matching of predicted against ground-truth timestamps within a
// +/- delta window, both sides processed in ascending time. For points on a
// line this greedy scheme attains the maximum matching. Exact-duplicate
// timestamps name the same keyframe: they count once for matching but stay in
// the denominators. Both sides empty is vacuously perfect; one side empty
// scores zero.
inline PRF temporal_prf(std::vector<double> pred, std::vector<double> gt, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("temporal_prf: delta must be > 0");
  if (pred.empty() && gt.empty()) return make_prf(1.0, 1.0);
  if (pred.empty() || gt.empty()) return make_prf(0.0, 0.0);
  const double n_pred = static_cast<double>(pred.size());
  const double n_gt = static_cast<double>(gt.size());
  std::sort(pred.begin(), pred.end());
  std::sort(gt.begin(), gt.end());
  pred.erase(std::unique(pred.begin(), pred.end()), pred.end());
  gt.erase(std::unique(gt.begin(), gt.end()), gt.end());

  int matches = 0;
  std::size_t i = 0, j = 0;
  while (i < pred.size() && j < gt.size()) {
    const double diff = pred[i] - gt[j];
    if (std::abs(diff) <= delta) {
      ++matches;
      ++i;
      ++j;
    } else if (diff < 0.0) {
      ++i;  // prediction too early for every remaining ground truth
    } else {
      ++j;  // ground truth too early for every remaining prediction
    }
  }
  return make_prf(static_cast<double>(matches) / n_pred,
                  static_cast<double>(matches) / n_gt);
}

// Soft visual overlap: precision is the mean over predicted frames of the
// best cosine similarity to any ground-truth frame, recall the converse.
// Values clamp to [0, 1].
inline PRF visual_prf(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt) {
  if (pred.rows() == 0 || gt.rows() == 0) return make_prf(0.0, 0.0);
  if (pred.cols() != gt.cols())
    throw std::invalid_argument("visual_prf: embedding dimension mismatch");

  Eigen::MatrixXd sim = pred * gt.transpose();  // pred.rows x gt.rows
  auto clamp01 = [](double v) { return std::min(1.0, std::max(0.0, v)); };

  double p = 0.0;
  for (int i = 0; i < sim.rows(); ++i) p += clamp01(sim.row(i).maxCoeff());
  p /= static_cast<double>(sim.rows());

  double r = 0.0;
  for (int j = 0; j < sim.cols(); ++j) r += clamp01(sim.col(j).maxCoeff());
  r /= static_cast<double>(sim.cols());

  return make_prf(p, r);
}

inline double completeness_rate(const std::vector<int>& csv_correct) {
  if (csv_correct.empty()) throw std::invalid_argument("completeness_rate: empty input");
  double sum = 0.0;
  for (int v : csv_correct) sum += v;
  return sum / static_cast<double>(csv_correct.size());
}

// Binary verdict parsed from a structured judge output: requires an
// <answer>Yes|No</answer> block; anything else (including a missing or
// malformed block) counts as 0.
inline int consistency_score(const std::string& judge_output) {
  protocol::detail::Block b = protocol::detail::find_block(judge_output, "answer");
  if (!b.found || !b.closed) return 0;
  std::string inner = trim(b.body);
  for (auto& c : inner) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return inner == "yes" ? 1 : 0;
}

}  // namespace metrics
}  // namespace timesearch
