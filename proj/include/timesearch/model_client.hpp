#pragma once

#include <httplib.h>

#include <Eigen/Dense>

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "timesearch/config.hpp"
#include "timesearch/core.hpp"

namespace timesearch {
namespace client {

struct TransportError : std::runtime_error {
  int attempts = 0;
  explicit TransportError(const std::string& what, int attempts_)
      : std::runtime_error(what), attempts(attempts_) {}
};

enum class Phase { rollout, csv, judge, filter_s1, filter_s2 };

inline std::string to_string(Phase p) {
  switch (p) {
    case Phase::rollout: return "rollout";
    case Phase::csv: return "csv";
    case Phase::judge: return "judge";
    case Phase::filter_s1: return "filter_s1";
    case Phase::filter_s2: return "filter_s2";
  }
  return "rollout";
}

inline Phase phase_from(const std::string& s) {
  if (s == "rollout") return Phase::rollout;
  if (s == "csv") return Phase::csv;
  if (s == "judge") return Phase::judge;
  if (s == "filter_s1") return Phase::filter_s1;
  if (s == "filter_s2") return Phase::filter_s2;
  throw std::invalid_argument("unknown phase: " + s);
}

// Routing metadata: ignored by live endpoints, used by the scripted mock and
// kept on every request for auditability.
struct RequestMeta {
  std::string question_id;
  Phase phase = Phase::rollout;
  int turn = 0;
};

struct ChatRequest {
  std::vector<Message> messages;
  int max_tokens = 256;
  double temperature = 0.0;
  bool tools_enabled = false;
  RequestMeta meta;
};

struct ChatResponse {
  std::string text;
  bool truncated = false;  // server hit max_tokens
};

// Marker that identifies a tool-bearing prompt; requests with tools disabled
// must never carry one.
inline constexpr const char* kToolsMarker = "<tools>";

inline void check_tool_invariant(const ChatRequest& req) {
  if (req.tools_enabled) return;
  for (const auto& m : req.messages)
    if (m.text.find(kToolsMarker) != std::string::npos)
      throw std::invalid_argument(
          "chat request with tools disabled carries tool definitions (phase " +
          to_string(req.meta.phase) + ", question " + req.meta.question_id + ")");
}

class ChatClient {
 public:
  virtual ~ChatClient() = default;

  ChatResponse chat(const ChatRequest& req) {
    check_tool_invariant(req);
    return do_chat(req);
  }

  virtual std::string identity() const = 0;

 protected:
  virtual ChatResponse do_chat(const ChatRequest& req) = 0;
};

// ---------------------------------------------------------------------------
// Scripted mock
// ---------------------------------------------------------------------------

// Canned responses keyed by (question_id, phase, turn). JSONL lines:
//   {"question_id": ..., "phase": ..., "turn": ..., "response": ...}
// The turn index counts consumption order: the k-th chat call issued for a
// given (question_id, phase) pair replays the entry with turn == k. Missing
// entries are scenario bugs and fail hard.
struct MockScript {
  std::map<std::tuple<std::string, std::string, int>, std::string> entries;

  void add(const std::string& question_id, Phase phase, int turn, const std::string& response) {
    auto key = std::make_tuple(question_id, to_string(phase), turn);
    if (!entries.emplace(key, response).second)
      throw std::invalid_argument("mock script: duplicate entry " + question_id + "/" +
                                  to_string(phase) + "/" + std::to_string(turn));
  }

  static MockScript from_jsonl(const std::string& content) {
    MockScript script;
    for (const auto& line : split_lines(content)) {
      std::string t = trim(line);
      if (t.empty()) continue;
      json j = json::parse(t);
      if (is_header_line(j)) continue;
      script.add(j.at("question_id").get<std::string>(),
                 phase_from(j.at("phase").get<std::string>()), j.at("turn").get<int>(),
                 j.at("response").get<std::string>());
    }
    return script;
  }

  static MockScript load(const std::string& path) { return from_jsonl(read_file(path)); }

  std::string to_jsonl() const {
    std::string out;
    for (const auto& [key, response] : entries) {
      json j{{"question_id", std::get<0>(key)},
             {"phase", std::get<1>(key)},
             {"turn", std::get<2>(key)},
             {"response", response}};
      out += j.dump();
      out += "\n";
    }
    return out;
  }
};

// Deterministic replay client. The lookup table is read-only after load; a
// per-(question, phase) cursor tracks consumption order. Every request is
// logged for later inspection by tests and audits.
class MockChatClient : public ChatClient {
 public:
  explicit MockChatClient(MockScript script) : script_(std::move(script)) {}

  std::string identity() const override { return "mock"; }

  const std::vector<ChatRequest>& requests() const { return log_; }

  void reset_cursors() {
    std::lock_guard<std::mutex> lock(mu_);
    cursors_.clear();
    log_.clear();
  }

 protected:
  ChatResponse do_chat(const ChatRequest& req) override {
    std::lock_guard<std::mutex> lock(mu_);
    log_.push_back(req);
    auto cursor_key = std::make_pair(req.meta.question_id, to_string(req.meta.phase));
    int turn = cursors_[cursor_key]++;
    auto it = script_.entries.find(
        std::make_tuple(req.meta.question_id, to_string(req.meta.phase), turn));
    if (it == script_.entries.end())
      throw std::runtime_error("mock script: missing entry for question " + req.meta.question_id +
                               ", phase " + to_string(req.meta.phase) + ", turn " +
                               std::to_string(turn));
    return ChatResponse{it->second, false};
  }

 private:
  MockScript script_;
  std::map<std::pair<std::string, std::string>, int> cursors_;
  std::vector<ChatRequest> log_;
  std::mutex mu_;
};

// ---------------------------------------------------------------------------
// HTTP chat client
// ---------------------------------------------------------------------------

struct RetryPolicy {
  int max_retries = 3;
  int backoff_ms = 100;  // doubled per retry
};

namespace detail {

inline std::string wire_role(Role r) {
  // Environment observations ride as user messages on the wire.
  return r == Role::environment ? "user" : timesearch::to_string(r);
}

// Splits message text on frame markers into alternating text/image content
// parts; frame k resolves to <asset_root>/<video_id>/frame_<index>.jpg.
inline json wire_content(const Message& m, const std::string& asset_root) {
  json parts = json::array();
  std::size_t pos = 0;
  std::size_t frame_i = 0;
  const std::string marker = kFrameMarker;
  while (true) {
    std::size_t hit = m.text.find(marker, pos);
    std::string chunk = m.text.substr(pos, hit == std::string::npos ? std::string::npos : hit - pos);
    if (!chunk.empty()) parts.push_back(json{{"type", "text"}, {"text", chunk}});
    if (hit == std::string::npos) break;
    if (frame_i < m.frames.size()) {
      const FrameRef& f = m.frames[frame_i++];
      std::string url = asset_root + "/" + f.video_id + "/frame_" + std::to_string(f.index) + ".jpg";
      parts.push_back(json{{"type", "image_url"}, {"image_url", json{{"url", url}}}});
    }
    pos = hit + marker.size();
  }
  if (parts.empty()) parts.push_back(json{{"type", "text"}, {"text", ""}});
  return parts;
}

struct UrlParts {
  std::string base;  // scheme://host:port
  std::string path;  // optional prefix
};

inline UrlParts split_url(const std::string& url) {
  UrlParts out;
  std::size_t scheme = url.find("://");
  std::size_t path_start = scheme == std::string::npos ? url.find('/')
                                                       : url.find('/', scheme + 3);
  if (path_start == std::string::npos) {
    out.base = url;
  } else {
    out.base = url.substr(0, path_start);
    out.path = url.substr(path_start);
    while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  }
  return out;
}

}  // namespace detail

// Chat-completion wire shape: POST <endpoint>/v1/chat/completions with
// role/content message arrays; frames are sent as image-url attachments.
// Transient failures (connect errors, 5xx) retry with exponential backoff.
class HttpChatClient : public ChatClient {
 public:
  HttpChatClient(std::string endpoint, std::string api_key, RetryPolicy retry,
                 std::string asset_root = "frames", std::string model = "")
      : endpoint_(std::move(endpoint)),
        api_key_(std::move(api_key)),
        retry_(retry),
        asset_root_(std::move(asset_root)),
        model_(std::move(model)) {}

  std::string identity() const override { return endpoint_; }

 protected:
  ChatResponse do_chat(const ChatRequest& req) override {
    json body{{"messages", json::array()},
              {"max_tokens", req.max_tokens},
              {"temperature", req.temperature}};
    if (!model_.empty()) body["model"] = model_;
    for (const auto& m : req.messages)
      body["messages"].push_back(json{{"role", detail::wire_role(m.role)},
                                      {"content", detail::wire_content(m, asset_root_)}});

    json reply = post_json("/v1/chat/completions", body);
    const json& choice = reply.at("choices").at(0);
    ChatResponse res;
    res.text = choice.at("message").at("content").get<std::string>();
    res.truncated = choice.contains("finish_reason") &&
                    choice.at("finish_reason").is_string() &&
                    choice.at("finish_reason").get<std::string>() == "length";
    return res;
  }

  json post_json(const std::string& route, const json& body) {
    detail::UrlParts url = detail::split_url(endpoint_);
    const std::string path = url.path + route;
    int attempts = 0;
    int backoff = retry_.backoff_ms;
    std::string last_error;
    while (attempts <= retry_.max_retries) {
      ++attempts;
      httplib::Client cli(url.base);
      cli.set_connection_timeout(10, 0);
      cli.set_read_timeout(120, 0);
      httplib::Headers headers;
      if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
      auto res = cli.Post(path, headers, body.dump(), "application/json");
      if (res && res->status == 200) {
        json parsed = json::parse(res->body, nullptr, false);
        if (parsed.is_discarded())
          throw std::runtime_error("endpoint returned unparseable JSON: " + endpoint_);
        return parsed;
      }
      if (res && res->status >= 400 && res->status < 500)
        throw std::runtime_error("endpoint rejected request (" + std::to_string(res->status) +
                                 "): " + res->body);
      last_error = res ? "status " + std::to_string(res->status)
                       : "transport error " + httplib::to_string(res.error());
      if (attempts <= retry_.max_retries) {
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
        backoff *= 2;
      }
    }
    throw TransportError("endpoint " + endpoint_ + " unreachable after " +
                             std::to_string(attempts) + " attempts: " + last_error,
                         attempts);
  }

 private:
  std::string endpoint_;
  std::string api_key_;
  RetryPolicy retry_;
  std::string asset_root_;
  std::string model_;
};

// ---------------------------------------------------------------------------
// Text embedding
// ---------------------------------------------------------------------------

class Embedder {
 public:
  virtual ~Embedder() = default;

  // One unit-norm vector per input text.
  std::vector<Eigen::VectorXd> embed(const std::vector<std::string>& texts) {
    if (texts.empty()) throw std::invalid_argument("embed: empty input");
    auto vecs = do_embed(texts);
    for (auto& v : vecs) {
      double n = v.norm();
      if (!(n > 0.0)) throw std::runtime_error("embed: zero-norm vector");
      v /= n;
    }
    return vecs;
  }

  virtual std::string identity() const = 0;

 protected:
  virtual std::vector<Eigen::VectorXd> do_embed(const std::vector<std::string>& texts) = 0;
};

// Precomputed query embeddings keyed by exact query string. File format:
//   {"dim": D, "vectors": {"query text": [f, ...], ...}}
class OfflineEmbedder : public Embedder {
 public:
  explicit OfflineEmbedder(const std::string& path) : path_(path) {
    json j = json::parse(read_file(path));
    dim_ = j.at("dim").get<int>();
    for (const auto& [query, vec] : j.at("vectors").items()) {
      auto values = vec.get<std::vector<double>>();
      if (static_cast<int>(values.size()) != dim_)
        throw std::runtime_error(path + ": vector for \"" + query + "\" has wrong dimension");
      table_[query] = Eigen::Map<Eigen::VectorXd>(values.data(), dim_);
    }
  }

  std::string identity() const override { return "offline:" + path_; }
  int dim() const { return dim_; }

 protected:
  std::vector<Eigen::VectorXd> do_embed(const std::vector<std::string>& texts) override {
    std::vector<Eigen::VectorXd> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
      auto it = table_.find(t);
      if (it == table_.end())
        throw std::runtime_error("offline embeddings: no entry for query \"" + t + "\"");
      out.push_back(it->second);
    }
    return out;
  }

 private:
  std::string path_;
  int dim_ = 0;
  std::map<std::string, Eigen::VectorXd> table_;
};

// POST <endpoint>/v1/embeddings {"input": [...]} -> {"data": [{"embedding": [...]}]}
class HttpEmbedder : public Embedder {
 public:
  HttpEmbedder(std::string endpoint, std::string api_key, RetryPolicy retry)
      : endpoint_(std::move(endpoint)), api_key_(std::move(api_key)), retry_(retry) {}

  std::string identity() const override { return endpoint_; }

 protected:
  std::vector<Eigen::VectorXd> do_embed(const std::vector<std::string>& texts) override {
    json body{{"input", texts}};
    detail::UrlParts url = detail::split_url(endpoint_);
    int attempts = 0;
    int backoff = retry_.backoff_ms;
    std::string last_error;
    while (attempts <= retry_.max_retries) {
      ++attempts;
      httplib::Client cli(url.base);
      cli.set_connection_timeout(10, 0);
      cli.set_read_timeout(120, 0);
      httplib::Headers headers;
      if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
      auto res = cli.Post(url.path + "/v1/embeddings", headers, body.dump(), "application/json");
      if (res && res->status == 200) {
        json reply = json::parse(res->body);
        std::vector<Eigen::VectorXd> out;
        for (const auto& item : reply.at("data")) {
          auto values = item.at("embedding").get<std::vector<double>>();
          out.push_back(Eigen::Map<Eigen::VectorXd>(values.data(),
                                                    static_cast<int>(values.size())));
        }
        return out;
      }
      if (res && res->status >= 400 && res->status < 500)
        throw std::runtime_error("embedding endpoint rejected request (" +
                                 std::to_string(res->status) + ")");
      last_error = res ? "status " + std::to_string(res->status)
                       : "transport error " + httplib::to_string(res.error());
      if (attempts <= retry_.max_retries) {
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
        backoff *= 2;
      }
    }
    throw TransportError("embedding endpoint " + endpoint_ + " unreachable after " +
                             std::to_string(attempts) + " attempts: " + last_error,
                         attempts);
  }

 private:
  std::string endpoint_;
  std::string api_key_;
  RetryPolicy retry_;
};

}  // namespace client
}  // namespace timesearch
