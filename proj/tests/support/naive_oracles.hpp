#pragma once

// Independent reference implementations used as test oracles. They stay
// deliberately naive (full determinants, exhaustive matching, double loops)
// and share no code with the implementations they check.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "timesearch/dpp.hpp"
#include "timesearch/metrics.hpp"

namespace tsupport {

inline double submatrix_det(const Eigen::MatrixXd& L, const std::vector<int>& rows) {
  if (rows.empty()) return 1.0;
  const int k = static_cast<int>(rows.size());
  Eigen::MatrixXd sub(k, k);
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b)
      sub(a, b) = L(rows[static_cast<std::size_t>(a)], rows[static_cast<std::size_t>(b)]);
  return sub.determinant();
}

// Greedy determinant maximization that recomputes the full subset determinant
// for every candidate at every step. O(N * F * F^3) but exact in intent.
inline std::vector<int> naive_greedy_map(const Eigen::MatrixXd& L, int budget,
                                         double floor = timesearch::dpp::kGainFloor) {
  const int n = static_cast<int>(L.rows());
  std::vector<int> sel;
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  double det_sel = 1.0;
  const int limit = std::min(budget, n);
  for (int step = 0; step < limit; ++step) {
    int best = -1;
    double best_ratio = floor;
    for (int i = 0; i < n; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      std::vector<int> cand = sel;
      cand.push_back(i);
      const double ratio = submatrix_det(L, cand) / det_sel;
      if (ratio > best_ratio) {
        best_ratio = ratio;
        best = i;
      }
    }
    if (best < 0) break;
    used[static_cast<std::size_t>(best)] = 1;
    sel.push_back(best);
    det_sel = submatrix_det(L, sel);
  }
  return sel;
}

// Exact maximum bipartite matching between timestamp lists under
// |pred - gt| <= delta, via bitmask DP over the ground-truth side.
inline int optimal_matching_count(const std::vector<double>& pred, const std::vector<double>& gt,
                                  double delta) {
  const int np = static_cast<int>(pred.size());
  const int ng = static_cast<int>(gt.size());
  if (np == 0 || ng == 0) return 0;
  std::vector<int> memo(static_cast<std::size_t>(np + 1) << ng, -1);
  // f(i, mask): best matches using pred[i..) with gt availability mask.
  std::function<int(int, int)> f = [&](int i, int mask) -> int {
    if (i == np) return 0;
    int& slot = memo[(static_cast<std::size_t>(i) << ng) | static_cast<std::size_t>(mask)];
    if (slot >= 0) return slot;
    int best = f(i + 1, mask);  // leave pred[i] unmatched
    for (int j = 0; j < ng; ++j) {
      if (!(mask & (1 << j))) continue;
      if (std::abs(pred[static_cast<std::size_t>(i)] - gt[static_cast<std::size_t>(j)]) <= delta)
        best = std::max(best, 1 + f(i + 1, mask & ~(1 << j)));
    }
    slot = best;
    return best;
  };
  return f(0, (1 << ng) - 1);
}

inline timesearch::metrics::PRF optimal_temporal_prf(std::vector<double> pred,
                                                     std::vector<double> gt, double delta) {
  using timesearch::metrics::make_prf;
  if (pred.empty() && gt.empty()) return make_prf(1.0, 1.0);
  if (pred.empty() || gt.empty()) return make_prf(0.0, 0.0);
  const double n_pred = static_cast<double>(pred.size());
  const double n_gt = static_cast<double>(gt.size());
  std::sort(pred.begin(), pred.end());
  std::sort(gt.begin(), gt.end());
  pred.erase(std::unique(pred.begin(), pred.end()), pred.end());
  gt.erase(std::unique(gt.begin(), gt.end()), gt.end());
  const int m = optimal_matching_count(pred, gt, delta);
  return make_prf(m / n_pred, m / n_gt);
}

inline timesearch::metrics::PRF naive_visual_prf(const Eigen::MatrixXd& pred,
                                                 const Eigen::MatrixXd& gt) {
  using timesearch::metrics::make_prf;
  if (pred.rows() == 0 || gt.rows() == 0) return make_prf(0.0, 0.0);
  auto clamp01 = [](double v) { return std::min(1.0, std::max(0.0, v)); };
  double p = 0.0;
  for (int i = 0; i < pred.rows(); ++i) {
    double best = -1e300;
    for (int j = 0; j < gt.rows(); ++j) {
      double dot = 0.0;
      for (int d = 0; d < pred.cols(); ++d) dot += pred(i, d) * gt(j, d);
      best = std::max(best, dot);
    }
    p += clamp01(best);
  }
  p /= static_cast<double>(pred.rows());
  double r = 0.0;
  for (int j = 0; j < gt.rows(); ++j) {
    double best = -1e300;
    for (int i = 0; i < pred.rows(); ++i) {
      double dot = 0.0;
      for (int d = 0; d < pred.cols(); ++d) dot += pred(i, d) * gt(j, d);
      best = std::max(best, dot);
    }
    r += clamp01(best);
  }
  r /= static_cast<double>(gt.rows());
  return make_prf(p, r);
}

}  // namespace tsupport
