#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "timesearch/embedding_store.hpp"

namespace timesearch {
namespace dpp {

// A greedy step is eligible only if it multiplies the subset determinant by
// more than this ratio; below it the kernel is effectively rank-deficient at
// the current subset and further picks would be rounding noise.
inline constexpr double kGainFloor = 1e-12;

// Query relevance per candidate: raw dot products and their min-max rescaled
// form. When the spread collapses below epsilon every weight becomes 1, which
// keeps the kernel a pure diversity term instead of annihilating it.
struct RelevanceVector {
  std::vector<double> raw;         // query . embedding per candidate
  std::vector<double> normalized;  // in [0, 1]
  double epsilon = 1e-8;
};

struct Kernel {
  Eigen::MatrixXd similarity;   // S, pairwise cosine of unit-norm rows
  Eigen::MatrixXd conditioned;  // diag(r) S diag(r), PSD by construction
};

struct GreedyResult {
  std::vector<int> selected;   // in selection order
  std::vector<double> gains;   // log-determinant gain of each pick
};

struct SearchParams {
  double epsilon = 1e-8;
  int max_candidates = 256;
};

inline RelevanceVector relevance_scores(const Eigen::MatrixXd& embeddings,
                                        const Eigen::VectorXd& query, double epsilon) {
  const int n = static_cast<int>(embeddings.rows());
  if (n == 0) throw std::invalid_argument("relevance_scores: empty candidate set");
  if (embeddings.cols() != query.size())
    throw std::invalid_argument("relevance_scores: query/embedding dimension mismatch");

  RelevanceVector rel;
  rel.epsilon = epsilon;
  rel.raw.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) rel.raw[static_cast<std::size_t>(i)] = embeddings.row(i).dot(query);

  const double lo = *std::min_element(rel.raw.begin(), rel.raw.end());
  const double hi = *std::max_element(rel.raw.begin(), rel.raw.end());
  rel.normalized.resize(static_cast<std::size_t>(n));
  if (hi - lo < epsilon) {
    std::fill(rel.normalized.begin(), rel.normalized.end(), 1.0);
  } else {
    const double denom = hi - lo + epsilon;
    for (int i = 0; i < n; ++i)
      rel.normalized[static_cast<std::size_t>(i)] = (rel.raw[static_cast<std::size_t>(i)] - lo) / denom;
  }
  return rel;
}

inline Kernel build_kernel(const Eigen::MatrixXd& embeddings, const RelevanceVector& rel) {
  const int n = static_cast<int>(embeddings.rows());
  if (static_cast<int>(rel.normalized.size()) != n)
    throw std::invalid_argument("build_kernel: relevance length does not match candidate count");

  Kernel k;
  k.similarity = embeddings * embeddings.transpose();
  k.conditioned.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      k.conditioned(i, j) = rel.normalized[static_cast<std::size_t>(i)] *
                            rel.normalized[static_cast<std::size_t>(j)] * k.similarity(i, j);
  return k;
}

// Greedy MAP over det(L_S) with incremental Cholesky-row updates. Each step
// adds the candidate whose determinant ratio d_i^2 is largest (ties to the
// lowest index) and stops once no candidate clears kGainFloor or the budget
// is reached. Equivalent to recomputing full determinants at every step.
inline GreedyResult greedy_map(const Kernel& kernel, int budget) {
  if (budget < 1) throw std::invalid_argument("greedy_map: budget must be >= 1");
  const Eigen::MatrixXd& L = kernel.conditioned;
  const int n = static_cast<int>(L.rows());

  GreedyResult res;
  if (n == 0) return res;

  std::vector<double> d2(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) d2[static_cast<std::size_t>(i)] = L(i, i);

  // cho(i, t): Cholesky row of candidate i, valid entries [0, steps_done).
  Eigen::MatrixXd cho = Eigen::MatrixXd::Zero(n, std::min(budget, n));
  std::vector<char> picked(static_cast<std::size_t>(n), 0);

  const int limit = std::min(budget, n);
  for (int t = 0; t < limit; ++t) {
    int best = -1;
    double best_d2 = kGainFloor;
    for (int i = 0; i < n; ++i) {
      if (!picked[static_cast<std::size_t>(i)] && d2[static_cast<std::size_t>(i)] > best_d2) {
        best_d2 = d2[static_cast<std::size_t>(i)];
        best = i;
      }
    }
    if (best < 0) break;  // no candidate clears the floor

    picked[static_cast<std::size_t>(best)] = 1;
    res.selected.push_back(best);
    res.gains.push_back(std::log(best_d2));
    if (static_cast<int>(res.selected.size()) == limit) break;

    const double dj = std::sqrt(best_d2);
    for (int i = 0; i < n; ++i) {
      if (picked[static_cast<std::size_t>(i)]) continue;
      double dot = 0.0;
      for (int s = 0; s < t; ++s) dot += cho(best, s) * cho(i, s);
      const double e = (L(best, i) - dot) / dj;
      cho(i, t) = e;
      d2[static_cast<std::size_t>(i)] -= e * e;
    }
    cho(best, t) = dj;
  }
  return res;
}

// The environment's search function: enumerate candidates in the clip, score
// query relevance, condition the similarity kernel, pick a diverse relevant
// subset. With no more candidates than the budget the whole clip is returned
// in time order (uniform temporal sampling).
inline FrameSet search(const FrameEmbeddingIndex& idx, const ToolCall& call,
                       const Eigen::VectorXd& query, const SearchParams& params) {
  FrameSet out;
  CandidateSet cands = frames_in_clip(idx, call.start_s, call.end_s, params.max_candidates);
  if (cands.empty()) return out;

  auto push = [&](int pos) {
    out.frames.push_back(FrameRef{idx.video_id,
                                  cands.timestamps[static_cast<std::size_t>(pos)],
                                  cands.indices[static_cast<std::size_t>(pos)]});
  };

  if (cands.size() <= call.frame_budget) {
    for (int i = 0; i < cands.size(); ++i) push(i);
    return out;
  }

  RelevanceVector rel = relevance_scores(cands.embeddings, query, params.epsilon);
  Kernel kernel = build_kernel(cands.embeddings, rel);
  GreedyResult greedy = greedy_map(kernel, call.frame_budget);

  std::vector<int> picks = greedy.selected;
  std::sort(picks.begin(), picks.end());  // candidate order == time order
  for (int pos : picks) push(pos);
  return out;
}

}  // namespace dpp
}  // namespace timesearch
