#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "support/fixtures.hpp"
#include "support/test_rng.hpp"
#include "timesearch/embedding_store.hpp"

using namespace timesearch;

TEST_CASE("load normalizes rows to unit norm", "[embedding_store]") {
  std::string dir = tsupport::fresh_dir("store_norm");
  Eigen::MatrixXd rows(3, 4);
  rows << 2.0, 0.0, 0.0, 0.0,  //
      0.0, 2.0, 0.0, 0.0,      //
      1.0, 1.0, 1.0, 1.0;
  write_index(dir, "vid", 4, 1.0, {0.0, 1.0, 2.0}, rows);

  FrameEmbeddingIndex idx = load_index(dir);
  REQUIRE(idx.count() == 3);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(idx.vectors.row(i).norm() - 1.0) <= 1e-4);
  CHECK(idx.vectors(0, 0) == Catch::Approx(1.0));
  CHECK(idx.vectors(2, 0) == Catch::Approx(0.5));
}

TEST_CASE("header and payload size must agree", "[embedding_store]") {
  std::string dir = tsupport::fresh_dir("store_mismatch");
  Eigen::MatrixXd rows = tsupport::synthetic_rows(4, 4, 7);
  write_index(dir, "vid", 4, 1.0, {0.0, 1.0, 2.0, 3.0}, rows);
  // Rewrite the header to claim 5 rows.
  json meta = json::parse(read_file(dir + "/index.json"));
  meta["count"] = 5;
  meta["timestamps"] = std::vector<double>{0.0, 1.0, 2.0, 3.0, 4.0};
  write_file(dir + "/index.json", meta.dump());
  CHECK_THROWS_WITH(load_index(dir), Catch::Matchers::ContainsSubstring("dimension mismatch"));
}

TEST_CASE("non-finite payload values are rejected", "[embedding_store]") {
  std::string dir = tsupport::fresh_dir("store_nan");
  Eigen::MatrixXd rows = tsupport::synthetic_rows(2, 4, 9);
  rows(1, 2) = std::numeric_limits<double>::quiet_NaN();
  write_index(dir, "vid", 4, 1.0, {0.0, 1.0}, rows);
  CHECK_THROWS_WITH(load_index(dir), Catch::Matchers::ContainsSubstring("non-finite"));
}

TEST_CASE("missing files are reported", "[embedding_store]") {
  std::string dir = tsupport::fresh_dir("store_missing");
  CHECK_THROWS_WITH(load_index(dir), Catch::Matchers::ContainsSubstring("index.json"));
}

TEST_CASE("synthetic 768-frame index round-trips", "[embedding_store]") {
  std::string dir = tsupport::fresh_dir("store_roundtrip");
  const int n = 768, dim = 16;
  Eigen::MatrixXd rows = tsupport::synthetic_rows(n, dim, 42);
  std::vector<double> ts;
  for (int i = 0; i < n; ++i) ts.push_back(0.5 * i);
  write_index(dir, "vid768", dim, 2.0, ts, rows);

  FrameEmbeddingIndex idx = load_index(dir);
  REQUIRE(idx.count() == n);
  CHECK(idx.video_id == "vid768");
  CHECK(idx.dim == dim);
  CHECK(idx.timestamps == ts);
  for (int i = 1; i < n; ++i) CHECK(idx.timestamps[i] > idx.timestamps[i - 1]);
  // Rows equal the float32-quantized originals, normalized.
  for (int i : {0, 1, 383, 767}) {
    Eigen::VectorXd expected(dim);
    for (int d = 0; d < dim; ++d) expected(d) = static_cast<double>(static_cast<float>(rows(i, d)));
    expected /= expected.norm();
    CHECK((idx.vectors.row(i).transpose() - expected).cwiseAbs().maxCoeff() <= 1e-7);
  }
}

TEST_CASE("frames_in_clip basics", "[embedding_store]") {
  FrameEmbeddingIndex idx = tsupport::make_synthetic_index("vid", 10, 4, 4.0, 3);  // t = 0..36

  SECTION("clip covering everything returns all frames") {
    CandidateSet c = frames_in_clip(idx, 0.0, 100.0, 100);
    CHECK(c.size() == 10);
    CHECK(c.indices == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  }

  SECTION("clip beyond the last frame is empty") {
    CandidateSet c = frames_in_clip(idx, 50.0, 60.0, 100);
    CHECK(c.empty());
  }

  SECTION("inverted window is empty") {
    CandidateSet c = frames_in_clip(idx, 20.0, 10.0, 100);
    CHECK(c.empty());
  }

  SECTION("negative start clamps to zero") {
    CandidateSet c = frames_in_clip(idx, -5.0, 4.0, 100);
    CHECK(c.indices == std::vector<int>{0, 1});
  }

  SECTION("inclusive bounds") {
    CandidateSet c = frames_in_clip(idx, 4.0, 8.0, 100);
    CHECK(c.indices == std::vector<int>{1, 2});
  }
}

TEST_CASE("frames_in_clip stride matches the reference selection", "[embedding_store]") {
  FrameEmbeddingIndex idx = tsupport::make_synthetic_index("vid", 100, 4, 1.0, 5);
  CandidateSet c = frames_in_clip(idx, 0.0, 99.0, 10);
  REQUIRE(c.size() == 10);
  CHECK(c.indices.front() == 0);  // first pick is the first in-clip frame
  // Independent reference: round(i * (M-1) / (K-1)).
  for (int i = 0; i < 10; ++i) {
    int expected = static_cast<int>(std::llround(i * 99.0 / 9.0));
    CHECK(c.indices[static_cast<std::size_t>(i)] == expected);
  }
}

TEST_CASE("frames_in_clip output is a strided subsequence of exact size", "[embedding_store]") {
  tsupport::Rng rng(2024);
  FrameEmbeddingIndex idx = tsupport::make_synthetic_index("vid", 57, 4, 1.5, 8);
  for (int trial = 0; trial < 200; ++trial) {
    double a = rng.uniform(-10.0, 100.0);
    double b = rng.uniform(-10.0, 100.0);
    int max_c = rng.uniform_int(1, 60);
    CandidateSet c = frames_in_clip(idx, a, b, max_c);

    // Count the true in-clip frames.
    int in_clip = 0;
    double lo = std::max(0.0, a);
    if (b >= lo)
      for (double t : idx.timestamps)
        if (t >= lo && t <= b) ++in_clip;
    CHECK(c.size() == std::min(in_clip, max_c));

    // Subsequence of the index's frame list: strictly increasing indices with
    // matching timestamps.
    for (int k = 0; k < c.size(); ++k) {
      if (k > 0) CHECK(c.indices[static_cast<std::size_t>(k)] > c.indices[static_cast<std::size_t>(k - 1)]);
      CHECK(c.timestamps[static_cast<std::size_t>(k)] ==
            idx.timestamps[static_cast<std::size_t>(c.indices[static_cast<std::size_t>(k)])]);
    }
  }
}
