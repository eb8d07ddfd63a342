#pragma once

#include <cstdlib>
#include <string>

#include "timesearch/core.hpp"

namespace timesearch {

struct Endpoints {
  std::string policy;
  std::string judge;
  std::string embed;
  // API keys come from the environment and are never echoed into outputs.
  std::string policy_key;
  std::string judge_key;
  std::string embed_key;
};

// Resolved harness configuration. Defaults follow the training setup this
// harness reproduces; every run echoes the resolved values into its outputs.
struct HarnessConfig {
  // Interaction budgets
  int max_search_turns = 8;      // executed searches per trajectory
  int frames_per_search = 8;     // frames returned per search call
  int preview_frames = 32;       // uniformly sampled initial frames
  int max_total_frames = 768;    // preview + searched frames per trajectory
  int max_video_tokens = 10240;
  int min_tokens_per_frame = 12;
  int max_tokens_per_frame = 256;
  int max_completion_length = 256;  // per-turn completion cap, enforced server-side

  // Group rollouts
  int group_size = 8;
  bool scale_rewards = false;
  double kl_beta = 0.005;  // metadata for the external trainer

  // Search function
  double epsilon = 1e-8;    // min-max normalization guard
  int max_candidates = 256; // candidate frames fed to the kernel per search

  // Evaluation
  double delta = 1.0;  // temporal matching window, seconds

  // Sampling
  double temperature = 1.0;      // rollout turns
  double csv_temperature = 0.0;  // re-answer pass is greedy by default

  // Transport
  int retry_max = 3;          // retries after the first attempt
  int retry_backoff_ms = 100; // doubled per retry
  int max_inflight = 8;

  // Data filtering
  int stage1_frames = 4;
  int stage2_attempts = 3;
  int format_retry_cap = 3;
  int filter_frame_cap = 64;  // preview + searched frames during stage 2

  std::string frame_asset_root = "frames";
  std::string prompts_dir;  // empty = built-in templates

  Endpoints endpoints;

  GroupConfig group() const { return GroupConfig{group_size, scale_rewards, kl_beta}; }
};

inline void validate(const HarnessConfig& c) {
  if (c.max_search_turns < 1) throw std::invalid_argument("config: max_search_turns must be >= 1");
  if (c.frames_per_search < 1) throw std::invalid_argument("config: frames_per_search must be >= 1");
  if (c.preview_frames < 0) throw std::invalid_argument("config: preview_frames must be >= 0");
  if (c.group_size < 2) throw std::invalid_argument("config: group_size must be >= 2");
  if (c.max_candidates < 1) throw std::invalid_argument("config: max_candidates must be >= 1");
  if (!(c.epsilon > 0.0)) throw std::invalid_argument("config: epsilon must be > 0");
  if (!(c.delta > 0.0)) throw std::invalid_argument("config: delta must be > 0");
  if (c.stage2_attempts < 1) throw std::invalid_argument("config: stage2_attempts must be >= 1");
}

inline void to_json(json& j, const HarnessConfig& c) {
  j = json{{"max_search_turns", c.max_search_turns},
           {"frames_per_search", c.frames_per_search},
           {"preview_frames", c.preview_frames},
           {"max_total_frames", c.max_total_frames},
           {"max_video_tokens", c.max_video_tokens},
           {"min_tokens_per_frame", c.min_tokens_per_frame},
           {"max_tokens_per_frame", c.max_tokens_per_frame},
           {"max_completion_length", c.max_completion_length},
           {"group_size", c.group_size},
           {"scale_rewards", c.scale_rewards},
           {"kl_beta", c.kl_beta},
           {"epsilon", c.epsilon},
           {"max_candidates", c.max_candidates},
           {"delta", c.delta},
           {"temperature", c.temperature},
           {"csv_temperature", c.csv_temperature},
           {"retry_max", c.retry_max},
           {"retry_backoff_ms", c.retry_backoff_ms},
           {"max_inflight", c.max_inflight},
           {"stage1_frames", c.stage1_frames},
           {"stage2_attempts", c.stage2_attempts},
           {"format_retry_cap", c.format_retry_cap},
           {"filter_frame_cap", c.filter_frame_cap},
           {"frame_asset_root", c.frame_asset_root},
           {"endpoints", json{{"policy", c.endpoints.policy},
                              {"judge", c.endpoints.judge},
                              {"embed", c.endpoints.embed}}}};
}

// Partial update: only keys present in `j` are applied.
inline void from_json(const json& j, HarnessConfig& c) {
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("max_search_turns", c.max_search_turns);
  get("frames_per_search", c.frames_per_search);
  get("preview_frames", c.preview_frames);
  get("max_total_frames", c.max_total_frames);
  get("max_video_tokens", c.max_video_tokens);
  get("min_tokens_per_frame", c.min_tokens_per_frame);
  get("max_tokens_per_frame", c.max_tokens_per_frame);
  get("max_completion_length", c.max_completion_length);
  get("group_size", c.group_size);
  get("scale_rewards", c.scale_rewards);
  get("kl_beta", c.kl_beta);
  get("epsilon", c.epsilon);
  get("max_candidates", c.max_candidates);
  get("delta", c.delta);
  get("temperature", c.temperature);
  get("csv_temperature", c.csv_temperature);
  get("retry_max", c.retry_max);
  get("retry_backoff_ms", c.retry_backoff_ms);
  get("max_inflight", c.max_inflight);
  get("stage1_frames", c.stage1_frames);
  get("stage2_attempts", c.stage2_attempts);
  get("format_retry_cap", c.format_retry_cap);
  get("filter_frame_cap", c.filter_frame_cap);
  get("frame_asset_root", c.frame_asset_root);
  if (j.contains("endpoints")) {
    const json& e = j.at("endpoints");
    if (e.contains("policy")) e.at("policy").get_to(c.endpoints.policy);
    if (e.contains("judge")) e.at("judge").get_to(c.endpoints.judge);
    if (e.contains("embed")) e.at("embed").get_to(c.endpoints.embed);
  }
  validate(c);
}

inline void apply_env(HarnessConfig& c) {
  auto env = [](const char* name) -> std::string {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string();
  };
  if (c.endpoints.policy.empty()) c.endpoints.policy = env("POLICY_ENDPOINT");
  if (c.endpoints.judge.empty()) c.endpoints.judge = env("JUDGE_ENDPOINT");
  if (c.endpoints.embed.empty()) c.endpoints.embed = env("EMBED_ENDPOINT");
  if (c.endpoints.policy_key.empty()) c.endpoints.policy_key = env("POLICY_API_KEY");
  if (c.endpoints.judge_key.empty()) c.endpoints.judge_key = env("JUDGE_API_KEY");
  if (c.endpoints.embed_key.empty()) c.endpoints.embed_key = env("EMBED_API_KEY");
}

inline std::string config_hash(const HarnessConfig& c) {
  json j;
  to_json(j, c);
  return fnv1a64_hex(j.dump());
}

}  // namespace timesearch
