#pragma once

// Shared scenario-building helpers: temp directories, synthetic embedding
// indexes with cross-platform-exact values, and quick constructors for
// questions and scripted conversations.

#include <filesystem>
#include <string>
#include <vector>

#include "timesearch/core.hpp"
#include "timesearch/embedding_store.hpp"
#include "timesearch/model_client.hpp"
#include "timesearch/protocol.hpp"

namespace tsupport {

inline std::string fresh_dir(const std::string& tag) {
  auto path = std::filesystem::temp_directory_path() / ("ts_" + tag);
  std::filesystem::remove_all(path);
  std::filesystem::create_directories(path);
  return path.string();
}

// Deterministic integer-derived embedding rows. Components come from a
// small linear-congruential walk, so the normalized doubles are identical on
// every IEEE-754 platform (only +,*,/,sqrt involved).
inline Eigen::MatrixXd synthetic_rows(int n, int dim, std::uint64_t seed) {
  Eigen::MatrixXd rows(n, dim);
  std::uint64_t s = seed * 6364136223846793005ull + 1442695040888963407ull;
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < dim; ++d) {
      s = s * 6364136223846793005ull + 1442695040888963407ull;
      rows(i, d) = static_cast<double>(static_cast<int>((s >> 33) % 2001) - 1000);
    }
    rows(i, i % dim) += 1500.0;  // keep rows nonzero and distinct
  }
  return rows;
}

// Writes a synthetic index directory: n frames, timestamps step_s apart.
inline void write_synthetic_index(const std::string& dir, const std::string& video_id, int n,
                                  int dim, double fps, double step_s, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  std::vector<double> ts;
  for (int i = 0; i < n; ++i) ts.push_back(step_s * i);
  timesearch::write_index(dir, video_id, dim, fps, ts, synthetic_rows(n, dim, seed));
}

inline timesearch::FrameEmbeddingIndex make_synthetic_index(const std::string& video_id, int n,
                                                            int dim, double step_s,
                                                            std::uint64_t seed) {
  timesearch::FrameEmbeddingIndex idx;
  idx.video_id = video_id;
  idx.dim = dim;
  idx.fps = 1.0;
  for (int i = 0; i < n; ++i) idx.timestamps.push_back(step_s * i);
  idx.vectors = synthetic_rows(n, dim, seed);
  for (int i = 0; i < n; ++i) idx.vectors.row(i) /= idx.vectors.row(i).norm();
  return idx;
}

inline timesearch::Question mcq_question(const std::string& id, const std::string& video_id,
                                         const std::string& gold = "B") {
  timesearch::Question q;
  q.id = id;
  q.video_id = video_id;
  q.text = "What happens in the video?";
  q.kind = timesearch::QuestionKind::mcq;
  q.options = {{"A", "first option"},
               {"B", "second option"},
               {"C", "third option"},
               {"D", "fourth option"}};
  q.gold_answer = gold;
  return q;
}

inline timesearch::Question open_question(const std::string& id, const std::string& video_id,
                                          const std::string& gold) {
  timesearch::Question q;
  q.id = id;
  q.video_id = video_id;
  q.text = "Describe the key moment.";
  q.kind = timesearch::QuestionKind::open;
  q.gold_answer = gold;
  return q;
}

inline timesearch::VideoSource video_for(const timesearch::FrameEmbeddingIndex& idx,
                                         double duration_s) {
  return timesearch::VideoSource{idx.video_id, duration_s, idx.fps};
}

inline std::string tool_turn(const std::string& think, double start, double end,
                             const std::string& query) {
  timesearch::ToolCall c;
  c.start_s = start;
  c.end_s = end;
  c.query = query;
  return timesearch::protocol::render_turn(think, c);
}

inline std::string answer_turn(const std::string& think, const std::string& answer) {
  return timesearch::protocol::render_turn(think, answer);
}

// Constant query embedder: every query maps to the same unit vector.
class ConstantEmbedder : public timesearch::client::Embedder {
 public:
  explicit ConstantEmbedder(Eigen::VectorXd v) : v_(std::move(v)) {}

  std::string identity() const override { return "constant"; }

 protected:
  std::vector<Eigen::VectorXd> do_embed(const std::vector<std::string>& texts) override {
    return std::vector<Eigen::VectorXd>(texts.size(), v_);
  }

 private:
  Eigen::VectorXd v_;
};

// Chat client that fails transport a fixed number of times, then delegates.
class FlakyChatClient : public timesearch::client::ChatClient {
 public:
  FlakyChatClient(timesearch::client::ChatClient& inner, int failures)
      : inner_(inner), failures_left_(failures) {}

  std::string identity() const override { return "flaky:" + inner_.identity(); }

 protected:
  timesearch::client::ChatResponse do_chat(const timesearch::client::ChatRequest& req) override {
    if (failures_left_ > 0) {
      --failures_left_;
      throw timesearch::client::TransportError("injected transport failure", 1);
    }
    return inner_.chat(req);
  }

 private:
  timesearch::client::ChatClient& inner_;
  int failures_left_;
};

}  // namespace tsupport
