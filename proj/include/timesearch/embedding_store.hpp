#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstring>
#include <map>
#include <string>
#include <vector>

#include "timesearch/core.hpp"

namespace timesearch {

// Per-video table of frame timestamps and unit-norm embedding rows.
// On-disk layout: <dir>/index.json + <dir>/embeddings.bin, where the binary
// payload is count x dim little-endian float32, row-major.
struct FrameEmbeddingIndex {
  std::string video_id;
  int dim = 0;
  double fps = 0.0;
  std::vector<double> timestamps;  // strictly ascending
  Eigen::MatrixXd vectors;         // N x dim, rows normalized at load

  int count() const { return static_cast<int>(timestamps.size()); }
};

inline void validate(const FrameEmbeddingIndex& idx) {
  if (idx.dim <= 0) throw std::invalid_argument("index " + idx.video_id + ": dim must be > 0");
  if (static_cast<int>(idx.timestamps.size()) != idx.vectors.rows())
    throw std::invalid_argument("index " + idx.video_id + ": timestamp/row count mismatch");
  if (idx.vectors.cols() != idx.dim)
    throw std::invalid_argument("index " + idx.video_id + ": vector width != dim");
  for (std::size_t i = 1; i < idx.timestamps.size(); ++i)
    if (!(idx.timestamps[i] > idx.timestamps[i - 1]))
      throw std::invalid_argument("index " + idx.video_id + ": timestamps not strictly ascending");
  for (int i = 0; i < idx.vectors.rows(); ++i) {
    double n = idx.vectors.row(i).norm();
    if (std::abs(n - 1.0) > 1e-4)
      throw std::invalid_argument("index " + idx.video_id + ": row " + std::to_string(i) +
                                  " not unit norm");
  }
}

inline FrameEmbeddingIndex load_index(const std::string& dir) {
  const std::string meta_path = dir + "/index.json";
  const std::string bin_path = dir + "/embeddings.bin";
  json meta = json::parse(read_file(meta_path));

  FrameEmbeddingIndex idx;
  meta.at("video_id").get_to(idx.video_id);
  meta.at("dim").get_to(idx.dim);
  meta.at("fps").get_to(idx.fps);
  meta.at("timestamps").get_to(idx.timestamps);
  const int count = meta.at("count").get<int>();
  if (idx.dim <= 0) throw std::runtime_error(meta_path + ": dim must be positive");
  if (count != static_cast<int>(idx.timestamps.size()))
    throw std::runtime_error(meta_path + ": count does not match timestamps length");

  std::string payload = read_file(bin_path);
  const std::size_t expected = static_cast<std::size_t>(count) *
                               static_cast<std::size_t>(idx.dim) * sizeof(float);
  if (payload.size() != expected)
    throw std::runtime_error(bin_path + ": dimension mismatch between header and payload (" +
                             std::to_string(payload.size()) + " bytes, expected " +
                             std::to_string(expected) + ")");

  idx.vectors.resize(count, idx.dim);
  const char* p = payload.data();
  for (int i = 0; i < count; ++i) {
    for (int d = 0; d < idx.dim; ++d) {
      float v;
      std::memcpy(&v, p, sizeof(float));
      p += sizeof(float);
      if (std::isnan(v) || std::isinf(v))
        throw std::runtime_error(bin_path + ": non-finite value at row " + std::to_string(i));
      idx.vectors(i, d) = static_cast<double>(v);
    }
    double n = idx.vectors.row(i).norm();
    if (!(n > 0.0))
      throw std::runtime_error(bin_path + ": zero-norm row " + std::to_string(i));
    idx.vectors.row(i) /= n;
  }
  validate(idx);
  return idx;
}

// Writes the two-file layout read by load_index. Rows are stored as given
// (float32), so non-normalized inputs exercise load-time normalization.
inline void write_index(const std::string& dir, const std::string& video_id, int dim, double fps,
                        const std::vector<double>& timestamps, const Eigen::MatrixXd& rows) {
  json meta{{"video_id", video_id},
            {"dim", dim},
            {"count", static_cast<int>(timestamps.size())},
            {"fps", fps},
            {"timestamps", timestamps}};
  write_file(dir + "/index.json", meta.dump());
  std::string payload;
  payload.resize(static_cast<std::size_t>(rows.rows()) * static_cast<std::size_t>(dim) *
                 sizeof(float));
  char* p = payload.data();
  for (int i = 0; i < rows.rows(); ++i) {
    for (int d = 0; d < dim; ++d) {
      float v = static_cast<float>(rows(i, d));
      std::memcpy(p, &v, sizeof(float));
      p += sizeof(float);
    }
  }
  write_file(dir + "/embeddings.bin", payload);
}

// Frames of one index restricted to a temporal clip, in time order.
struct CandidateSet {
  std::vector<int> indices;        // rows of the owning index
  std::vector<double> timestamps;  // ascending
  Eigen::MatrixXd embeddings;      // one row per candidate

  bool empty() const { return indices.empty(); }
  int size() const { return static_cast<int>(indices.size()); }
};

// All frames with timestamp in [start_s, end_s], evenly strided down to
// max_candidates when the clip holds more. Out-of-range bounds clamp; an
// empty intersection (or inverted window) yields an empty set.
inline CandidateSet frames_in_clip(const FrameEmbeddingIndex& idx, double start_s, double end_s,
                                   int max_candidates) {
  CandidateSet out;
  if (max_candidates < 1) return out;
  if (start_s < 0.0) start_s = 0.0;
  if (end_s < start_s) return out;

  const auto& ts = idx.timestamps;
  auto lo = std::lower_bound(ts.begin(), ts.end(), start_s);
  auto hi = std::upper_bound(ts.begin(), ts.end(), end_s);
  if (lo >= hi) return out;

  const int first = static_cast<int>(lo - ts.begin());
  const int in_clip = static_cast<int>(hi - lo);
  std::vector<int> picks = strided_indices(in_clip, std::min(in_clip, max_candidates));

  out.indices.reserve(picks.size());
  out.timestamps.reserve(picks.size());
  out.embeddings.resize(static_cast<int>(picks.size()), idx.dim);
  for (std::size_t k = 0; k < picks.size(); ++k) {
    int row = first + picks[k];
    out.indices.push_back(row);
    out.timestamps.push_back(ts[static_cast<std::size_t>(row)]);
    out.embeddings.row(static_cast<int>(k)) = idx.vectors.row(row);
  }
  return out;
}

// Loads and memoizes indexes under <root>/<video_id>/.
class IndexCache {
 public:
  explicit IndexCache(std::string root) : root_(std::move(root)) {}

  const FrameEmbeddingIndex& get(const std::string& video_id) {
    auto it = cache_.find(video_id);
    if (it == cache_.end())
      it = cache_.emplace(video_id, load_index(root_ + "/" + video_id)).first;
    return it->second;
  }

  const std::string& root() const { return root_; }

 private:
  std::string root_;
  std::map<std::string, FrameEmbeddingIndex> cache_;
};

}  // namespace timesearch
