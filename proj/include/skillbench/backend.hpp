#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "skillbench/prompt.hpp"

namespace skillbench {

enum class BackendKind { Http, Mock, Heuristic };

BackendKind backend_kind_from_name(const std::string& name);
const char* backend_kind_name(BackendKind kind);

struct BackendConfig {
  BackendKind kind = BackendKind::Heuristic;
  std::string endpoint;  // http only, e.g. http://host:8000/v1
  std::string model_id;
  std::size_t context_limit_tokens = 10240;
  double request_timeout_s = 120.0;
  double vram_gb = 0.0;  // static per-model figure used for cost accounting
};

struct CompletionResult {
  std::string text;
  double latency_s = 0.0;
  std::size_t prompt_tokens = 0;      // 0 when the backend reports no usage
  std::size_t completion_tokens = 0;
};

struct ScriptedResponse {
  std::string text;
  double latency_s = 0.0;
};

struct ScriptedResponses {
  std::vector<ScriptedResponse> responses;
  std::size_t cursor = 0;
};

// ceil(total content characters / 4). An estimate for the overflow guard
// only; never used for metrics.
std::size_t estimate_tokens(const Transcript& t);

// Uniform chat-completion interface. Implementations never mutate the
// transcript; all throw Error{ContextOverflow} when the estimated prompt
// exceeds context_limit_tokens.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual CompletionResult complete(const Transcript& t) = 0;
  const BackendConfig& config() const { return config_; }

 protected:
  explicit Backend(BackendConfig config) : config_(std::move(config)) {}
  void check_context(const Transcript& t, std::size_t known_prompt_tokens = 0) const;

  BackendConfig config_;
};

// OpenAI-compatible endpoint: POST <endpoint>/chat/completions with
// {"model", "messages"} and no sampling overrides; reads
// choices[0].message.content. Bearer token from $SKILLBENCH_API_KEY.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(BackendConfig config);
  CompletionResult complete(const Transcript& t) override;

 private:
  std::string origin_;       // scheme://host[:port]
  std::string path_prefix_;  // anything after the authority, e.g. /v1

  // Exact usage reported for previously sent transcripts; preferred over the
  // character estimate by the overflow guard.
  mutable std::mutex mutex_;
  std::unordered_map<std::uint64_t, std::size_t> exact_prompt_tokens_;
};

// Replays canned responses in order. Deterministic: latency comes from the
// script, not the clock.
class MockBackend final : public Backend {
 public:
  MockBackend(BackendConfig config, ScriptedResponses script);
  CompletionResult complete(const Transcript& t) override;
  std::size_t cursor() const;

 private:
  mutable std::mutex mutex_;
  ScriptedResponses script_;
};

// Offline stand-in for model routing: answers selection prompts via Jaccard
// keyword overlap and execution prompts with a fixed placeholder message.
// Reports zero latency so offline runs are byte-reproducible.
class HeuristicBackend final : public Backend {
 public:
  explicit HeuristicBackend(BackendConfig config);
  CompletionResult complete(const Transcript& t) override;
};

std::unique_ptr<Backend> make_backend(const BackendConfig& config, ScriptedResponses script = {});

// Scores each skill's "name + description" against the task by Jaccard
// similarity over lowercase word sets and returns the argmax (ties to the
// lexicographically smaller name); empty selection when every score is zero.
// Throws Error{EmptyInput} on an empty hub or tokenless task.
SelectionResponse heuristic_select(const std::string& task, const SkillHub& hub);

std::vector<std::string> tokenize_words(const std::string& text);

// Script file: JSON array of strings, or of {"text": ..., "latency_s": ...}.
ScriptedResponses load_script(const std::string& path);

// Static VRAM figures for the known open-weight model ids.
std::optional<double> default_vram_gb(const std::string& model_id);

}  // namespace skillbench
