#include <catch2/catch_amalgamated.hpp>

#include "support/fixtures.hpp"
#include "support/naive_oracles.hpp"
#include "support/test_rng.hpp"
#include "timesearch/dpp.hpp"

using namespace timesearch;
using Catch::Approx;

namespace {

// Candidate pool + query with everything needed for a search oracle run.
struct RandomCase {
  Eigen::MatrixXd embeddings;
  Eigen::VectorXd query;
};

RandomCase random_case(tsupport::Rng& rng, int n, int dim) {
  return RandomCase{tsupport::random_unit_rows(rng, n, dim),
                    tsupport::random_unit_vector(rng, dim)};
}

dpp::Kernel kernel_for(const RandomCase& c, double epsilon = 1e-8) {
  auto rel = dpp::relevance_scores(c.embeddings, c.query, epsilon);
  return dpp::build_kernel(c.embeddings, rel);
}

}  // namespace

TEST_CASE("relevance rescales to the unit interval", "[dpp]") {
  Eigen::MatrixXd rows(3, 3);
  rows << 0.2, 0.0, 0.0,  //
      0.5, 0.0, 0.0,      //
      0.8, 0.0, 0.0;
  // Rows are intentionally not unit norm here; raw scores are plain dots.
  Eigen::VectorXd q(3);
  q << 1.0, 0.0, 0.0;

  auto rel = dpp::relevance_scores(rows, q, 1e-12);
  CHECK(rel.raw == std::vector<double>{0.2, 0.5, 0.8});
  CHECK(rel.normalized[0] == Approx(0.0).margin(1e-9));
  CHECK(rel.normalized[1] == Approx(0.5).epsilon(1e-6));
  CHECK(rel.normalized[2] == Approx(1.0).epsilon(1e-6));
}

TEST_CASE("degenerate spread maps every weight to one", "[dpp]") {
  Eigen::MatrixXd rows(4, 2);
  rows << 1, 0, 1, 0, 1, 0, 1, 0;
  Eigen::VectorXd q(2);
  q << 1.0, 0.0;
  auto rel = dpp::relevance_scores(rows, q, 1e-8);
  for (double r : rel.normalized) CHECK(r == 1.0);
}

TEST_CASE("relevance agrees with an independent scalar recomputation", "[dpp]") {
  tsupport::Rng rng(11);
  RandomCase c = random_case(rng, 50, 8);
  const double eps = 1e-8;
  auto rel = dpp::relevance_scores(c.embeddings, c.query, eps);

  // Scalar reference path.
  std::vector<double> raw(50);
  for (int i = 0; i < 50; ++i) {
    double dot = 0.0;
    for (int d = 0; d < 8; ++d) dot += c.embeddings(i, d) * c.query(d);
    raw[static_cast<std::size_t>(i)] = dot;
  }
  double lo = raw[0], hi = raw[0];
  for (double v : raw) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double min_norm = 1e300, max_norm = -1e300;
  for (int i = 0; i < 50; ++i) {
    double expected = (raw[static_cast<std::size_t>(i)] - lo) / (hi - lo + eps);
    CHECK(rel.normalized[static_cast<std::size_t>(i)] == Approx(expected).margin(1e-12));
    min_norm = std::min(min_norm, rel.normalized[static_cast<std::size_t>(i)]);
    max_norm = std::max(max_norm, rel.normalized[static_cast<std::size_t>(i)]);
  }
  CHECK(min_norm == 0.0);
  CHECK(max_norm < 1.0);  // spread / (spread + eps)
}

TEST_CASE("relevance rejects an empty candidate set", "[dpp]") {
  Eigen::MatrixXd empty(0, 4);
  Eigen::VectorXd q = Eigen::VectorXd::Unit(4, 0);
  CHECK_THROWS_AS(dpp::relevance_scores(empty, q, 1e-8), std::invalid_argument);
}

TEST_CASE("kernel on identical unit vectors is all ones", "[dpp]") {
  Eigen::MatrixXd rows(2, 3);
  rows << 1, 0, 0, 1, 0, 0;
  dpp::RelevanceVector rel;
  rel.normalized = {1.0, 1.0};
  dpp::Kernel k = dpp::build_kernel(rows, rel);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(k.conditioned(i, j) == Approx(1.0));
}

TEST_CASE("kernel on orthogonal vectors is diagonal", "[dpp]") {
  Eigen::MatrixXd rows(2, 2);
  rows << 1, 0, 0, 1;
  dpp::RelevanceVector rel;
  rel.normalized = {0.5, 1.0};
  dpp::Kernel k = dpp::build_kernel(rows, rel);
  CHECK(k.conditioned(0, 0) == Approx(0.25));
  CHECK(k.conditioned(1, 1) == Approx(1.0));
  CHECK(k.conditioned(0, 1) == Approx(0.0).margin(1e-15));
  CHECK(k.conditioned(1, 0) == Approx(0.0).margin(1e-15));
}

TEST_CASE("kernel length mismatch is rejected", "[dpp]") {
  Eigen::MatrixXd rows(2, 2);
  rows << 1, 0, 0, 1;
  dpp::RelevanceVector rel;
  rel.normalized = {1.0};
  CHECK_THROWS_AS(dpp::build_kernel(rows, rel), std::invalid_argument);
}

TEST_CASE("conditioned kernel matches the elementwise formula and is PSD", "[dpp]") {
  tsupport::Rng rng(17);
  RandomCase c = random_case(rng, 8, 8);
  auto rel = dpp::relevance_scores(c.embeddings, c.query, 1e-8);
  dpp::Kernel k = dpp::build_kernel(c.embeddings, rel);

  // Unit diagonal on the similarity side.
  for (int i = 0; i < 8; ++i) CHECK(std::abs(k.similarity(i, i) - 1.0) <= 1e-5);
  // Elementwise identity.
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j)
      CHECK(std::abs(k.conditioned(i, j) -
                     rel.normalized[static_cast<std::size_t>(i)] *
                         rel.normalized[static_cast<std::size_t>(j)] * k.similarity(i, j)) <= 1e-6);
  // Eigen-decomposition oracle for positive semidefiniteness.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k.conditioned);
  CHECK(es.eigenvalues().minCoeff() >= -1e-8);
}

TEST_CASE("budget one picks the argmax relevance", "[dpp]") {
  tsupport::Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    RandomCase c = random_case(rng, rng.uniform_int(2, 32), 8);
    auto rel = dpp::relevance_scores(c.embeddings, c.query, 1e-8);
    dpp::Kernel k = dpp::build_kernel(c.embeddings, rel);
    auto res = dpp::greedy_map(k, 1);

    int argmax = 0;
    for (std::size_t i = 1; i < rel.normalized.size(); ++i)
      if (rel.normalized[i] > rel.normalized[static_cast<std::size_t>(argmax)])
        argmax = static_cast<int>(i);
    REQUIRE(res.selected.size() == 1);
    CHECK(res.selected[0] == argmax);
  }
}

TEST_CASE("fast greedy equals the naive determinant greedy", "[dpp]") {
  tsupport::Rng rng(29);
  for (int trial = 0; trial < 100; ++trial) {
    RandomCase c = random_case(rng, 6 + rng.uniform_int(0, 10), 8);
    dpp::Kernel k = kernel_for(c);
    auto fast = dpp::greedy_map(k, 3);
    auto naive = tsupport::naive_greedy_map(k.conditioned, 3);
    CHECK(fast.selected == naive);
  }
}

TEST_CASE("identical embeddings stop after the top-relevance pick", "[dpp]") {
  // All-ones similarity: any second pick has zero marginal determinant.
  Eigen::MatrixXd rows(5, 3);
  for (int i = 0; i < 5; ++i) rows.row(i) << 1, 0, 0;
  dpp::RelevanceVector rel;
  rel.normalized = {0.2, 0.9, 0.4, 0.6, 0.1};
  dpp::Kernel k = dpp::build_kernel(rows, rel);

  auto fast = dpp::greedy_map(k, 3);
  auto naive = tsupport::naive_greedy_map(k.conditioned, 3);
  REQUIRE(fast.selected == std::vector<int>{1});
  CHECK(fast.selected == naive);
}

TEST_CASE("greedy gain trace is non-increasing", "[dpp]") {
  tsupport::Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    RandomCase c = random_case(rng, 24, 12);
    auto res = dpp::greedy_map(kernel_for(c), 8);
    for (std::size_t t = 1; t < res.gains.size(); ++t)
      CHECK(res.gains[t] <= res.gains[t - 1] + 1e-9);
  }
}

TEST_CASE("selection is order-equivariant under candidate permutation", "[dpp]") {
  tsupport::Rng rng(37);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 16;
    RandomCase c = random_case(rng, n, 8);
    dpp::Kernel k = kernel_for(c);
    auto base = dpp::greedy_map(k, 5);

    // Random permutation of candidates.
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    for (int i = n - 1; i > 0; --i)
      std::swap(perm[static_cast<std::size_t>(i)],
                perm[static_cast<std::size_t>(rng.uniform_int(0, i))]);

    Eigen::MatrixXd permuted(n, 8);
    for (int i = 0; i < n; ++i)
      permuted.row(perm[static_cast<std::size_t>(i)]) = c.embeddings.row(i);
    auto shuffled = dpp::greedy_map(kernel_for({permuted, c.query}), 5);

    std::vector<int> expected;
    for (int i : base.selected) expected.push_back(perm[static_cast<std::size_t>(i)]);
    std::sort(expected.begin(), expected.end());
    std::vector<int> got = shuffled.selected;
    std::sort(got.begin(), got.end());
    CHECK(got == expected);
  }
}

TEST_CASE("search returns the whole clip when it fits the budget", "[dpp]") {
  FrameEmbeddingIndex idx = tsupport::make_synthetic_index("vid", 40, 8, 1.0, 41);
  ToolCall call{10.0, 14.0, "q", 8};  // 5 frames in clip
  Eigen::VectorXd q = Eigen::VectorXd::Unit(8, 0);
  FrameSet out = dpp::search(idx, call, q, {});
  REQUIRE(out.size() == 5);
  for (int i = 0; i < 5; ++i) CHECK(out.frames[static_cast<std::size_t>(i)].timestamp_s == 10.0 + i);
}

TEST_CASE("search equals the naive pipeline end to end", "[dpp]") {
  tsupport::Rng rng(43);
  FrameEmbeddingIndex idx = tsupport::make_synthetic_index("vid", 64, 8, 1.0, 47);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd q = tsupport::random_unit_vector(rng, 8);
    ToolCall call{0.0, 63.0, "q", 8};
    FrameSet fast = dpp::search(idx, call, q, {});

    CandidateSet cands = frames_in_clip(idx, 0.0, 63.0, 256);
    auto rel = dpp::relevance_scores(cands.embeddings, q, 1e-8);
    dpp::Kernel k = dpp::build_kernel(cands.embeddings, rel);
    std::vector<int> naive = tsupport::naive_greedy_map(k.conditioned, 8);
    std::sort(naive.begin(), naive.end());
    FrameSet expected;
    for (int pos : naive)
      expected.frames.push_back(FrameRef{"vid", cands.timestamps[static_cast<std::size_t>(pos)],
                                         cands.indices[static_cast<std::size_t>(pos)]});

    REQUIRE(fast.size() == 8);
    CHECK(fast == expected);
    // Unique indices, ascending timestamps.
    CHECK_NOTHROW(validate(fast));
  }
}

TEST_CASE("budget one with an exactly matching query selects that frame", "[dpp]") {
  FrameEmbeddingIndex idx = tsupport::make_synthetic_index("vid", 20, 8, 1.0, 53);
  const int target = 13;
  Eigen::VectorXd q = idx.vectors.row(target).transpose();
  ToolCall call{0.0, 19.0, "q", 1};
  FrameSet out = dpp::search(idx, call, q, {});
  REQUIRE(out.size() == 1);
  CHECK(out.frames[0].index == target);
}

TEST_CASE("empty clip yields an empty frame set", "[dpp]") {
  FrameEmbeddingIndex idx = tsupport::make_synthetic_index("vid", 20, 8, 1.0, 59);
  ToolCall call{100.0, 200.0, "q", 8};
  Eigen::VectorXd q = Eigen::VectorXd::Unit(8, 0);
  CHECK(dpp::search(idx, call, q, {}).empty());
}

TEST_CASE("search size law under distinct positive relevance", "[dpp]") {
  tsupport::Rng rng(61);
  FrameEmbeddingIndex idx = tsupport::make_synthetic_index("vid", 30, 12, 1.0, 67);
  for (int trial = 0; trial < 40; ++trial) {
    double a = rng.uniform(0.0, 29.0);
    double b = rng.uniform(0.0, 29.0);
    if (a > b) std::swap(a, b);
    int budget = rng.uniform_int(1, 8);
    Eigen::VectorXd q = tsupport::random_unit_vector(rng, 12);
    ToolCall call{a, b, "q", budget};
    FrameSet out = dpp::search(idx, call, q, {});
    int in_clip = frames_in_clip(idx, a, b, 256).size();
    // dim (12) exceeds the budget cap (8): full-rank kernels, no early stop.
    CHECK(out.size() == std::min(in_clip, budget));
  }
}
