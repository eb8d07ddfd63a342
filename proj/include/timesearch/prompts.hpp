#pragma once

#include <map>
#include <string>

#include "timesearch/util.hpp"

namespace timesearch {

// Built-in message templates. The same texts are shipped under prompts/ so
// deployments can edit them; load_prompts() prefers the files when present.
namespace default_prompts {

inline constexpr const char* kSystem =
    R"(You are a helpful assistant.

# Tools

You may call one or more functions to assist with the user query.

You are provided with function signatures within <tools></tools> XML tags:
<tools>
{"type": "function", "function": {"name": "search", "description": "Search a temporal clip of the video and retrieve the most relevant frames.", "parameters": {"type": "object", "properties": {"start": {"type": "number", "description": "Start of the temporal clip in seconds."}, "end": {"type": "number", "description": "End of the temporal clip in seconds."}, "query": {"type": "string", "description": "Text query describing the visual content to search for."}}, "required": ["start", "end", "query"]}}}
</tools>

For each function call, return a json object with function arguments within <tool_call></tool_call> XML tags:
<tool_call>
{"start": <start-seconds>, "end": <end-seconds>, "query": "<query-text>"}
</tool_call>
)";

inline constexpr const char* kQa =
    R"(The video duration: {duration} seconds.
{preview}
Answer the following question about the video.

Question: {question}
{options}
You must conduct reasoning inside <think> and </think> first before any tool call or final answer. Your response must strictly follow one of the two formats:
<think>...</think><tool_call>{"start": <start-seconds>, "end": <end-seconds>, "query": "<query-text>"}</tool_call>
or
<think>...</think><answer>...</answer>

You may call the search tool at most {max_search_turns} times. When the gathered frames are sufficient, provide the final answer within <answer> and </answer>.
)";

inline constexpr const char* kSearchResponse =
    R"(Here are the video frames retrieved by the search:
{frames}
If the current frames provide sufficient evidence, give the final answer within <answer> and </answer>. Otherwise, call the tool again with different parameters in JSON format within <tool_call> and </tool_call>.
)";

inline constexpr const char* kSearchResponseEmpty =
    R"(No frames were found within the specified temporal boundaries. Please call the tool again with different parameters in JSON format within <tool_call> and </tool_call>.
)";

inline constexpr const char* kCsv =
    R"(The following frames were gathered from the video:
{frames}
Answer the question using only these frames. Answer as briefly as possible. If the visual evidence is insufficient to answer the question, say "I don't know".

Question: {question}
{options}
No tools are available. Provide your final answer within <answer> and </answer>.
)";

inline constexpr const char* kJudgeAccuracy =
    R"(You are comparing a model's answer to a video question against the reference answer.

Question: {question}
Reference answer: {gold}
Model answer: {candidate}

Judge whether the model answer is semantically consistent with the reference answer. First give a short analysis within <think> and </think>, then output <answer>Yes</answer> if they agree or <answer>No</answer> if they do not.
)";

inline constexpr const char* kConsistency =
    R"(You are evaluating whether a reasoning process coherently supports a final answer.

Question: {question}
Reasoning process: {reasoning}
Final answer: {answer}

Judge whether the reasoning process coherently supports the final answer under the given question. First give a short analysis within <think> and </think>, then output <answer>Yes</answer> or <answer>No</answer>.
)";

inline constexpr const char* kNoToolsQa =
    R"(Here are frames uniformly sampled from the video:
{frames}
Answer the following question about the video.

Question: {question}
{options}
No tools are available. You must conduct reasoning inside <think> and </think> first, then provide the final answer within <answer> and </answer>.
)";

}  // namespace default_prompts

struct PromptSet {
  std::string system = default_prompts::kSystem;
  std::string qa = default_prompts::kQa;
  std::string search_response = default_prompts::kSearchResponse;
  std::string search_response_empty = default_prompts::kSearchResponseEmpty;
  std::string csv = default_prompts::kCsv;
  std::string judge_accuracy = default_prompts::kJudgeAccuracy;
  std::string consistency = default_prompts::kConsistency;
  std::string notools_qa = default_prompts::kNoToolsQa;
};

// Overlays files from `dir` (when present) on top of the built-in texts.
inline PromptSet load_prompts(const std::string& dir) {
  PromptSet p;
  if (dir.empty()) return p;
  auto maybe = [&dir](const char* name, std::string& slot) {
    std::string path = dir + "/" + name;
    if (file_exists(path)) slot = read_file(path);
  };
  maybe("system_prompt.txt", p.system);
  maybe("qa_prompt.txt", p.qa);
  maybe("search_response.txt", p.search_response);
  maybe("search_response_empty.txt", p.search_response_empty);
  maybe("csv_prompt.txt", p.csv);
  maybe("judge_accuracy_prompt.txt", p.judge_accuracy);
  maybe("consistency_prompt.txt", p.consistency);
  maybe("notools_qa_prompt.txt", p.notools_qa);
  return p;
}

// Replaces {key} placeholders for the provided keys only; all other braces
// (e.g. the JSON examples inside templates) pass through untouched.
inline std::string render_template(std::string tmpl,
                                   const std::map<std::string, std::string>& values) {
  for (const auto& [key, value] : values) {
    const std::string token = "{" + key + "}";
    std::size_t pos = 0;
    while ((pos = tmpl.find(token, pos)) != std::string::npos) {
      tmpl.replace(pos, token.size(), value);
      pos += value.size();
    }
  }
  return tmpl;
}

// Content fingerprint of every template in use, embedded in output artifacts.
inline std::string template_hash(const PromptSet& p) {
  std::string all;
  for (const std::string* t : {&p.system, &p.qa, &p.search_response, &p.search_response_empty,
                               &p.csv, &p.judge_accuracy, &p.consistency, &p.notools_qa}) {
    all += *t;
    all += '\x1f';
  }
  return fnv1a64_hex(all);
}

}  // namespace timesearch
