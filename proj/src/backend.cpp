#include "skillbench/backend.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "skillbench/hash.hpp"
#include "skillbench/templates.hpp"

namespace skillbench {

BackendKind backend_kind_from_name(const std::string& name) {
  if (name == "http") return BackendKind::Http;
  if (name == "mock") return BackendKind::Mock;
  if (name == "heuristic") return BackendKind::Heuristic;
  throw Error(ErrorCode::ConfigError, "unknown backend '" + name + "'");
}

const char* backend_kind_name(BackendKind kind) {
  switch (kind) {
    case BackendKind::Http: return "http";
    case BackendKind::Mock: return "mock";
    case BackendKind::Heuristic: return "heuristic";
  }
  return "heuristic";
}

std::size_t estimate_tokens(const Transcript& t) {
  std::size_t chars = 0;
  for (const auto& m : t.messages) chars += m.content.size();
  return (chars + 3) / 4;
}

void Backend::check_context(const Transcript& t, std::size_t known_prompt_tokens) const {
  std::size_t estimated = known_prompt_tokens > 0 ? known_prompt_tokens : estimate_tokens(t);
  if (estimated > config_.context_limit_tokens) {
    throw Error(ErrorCode::ContextOverflow,
                "estimated " + std::to_string(estimated) + " tokens exceeds limit " +
                    std::to_string(config_.context_limit_tokens));
  }
}

// ---- http -------------------------------------------------------------------

namespace {

std::uint64_t transcript_key(const Transcript& t) {
  std::string buffer;
  for (const auto& m : t.messages) {
    buffer += role_name(m.role);
    buffer += '\x1f';
    buffer += m.content;
    buffer += '\x1e';
  }
  return fnv1a64(buffer);
}

}  // namespace

HttpBackend::HttpBackend(BackendConfig config) : Backend(std::move(config)) {
  const std::string& url = config_.endpoint;
  auto scheme_end = url.find("://");
  if (url.empty() || scheme_end == std::string::npos) {
    throw Error(ErrorCode::ConfigError, "http backend needs an endpoint URL, got '" + url + "'");
  }
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    origin_ = url;
  } else {
    origin_ = url.substr(0, path_start);
    path_prefix_ = url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  }
}

CompletionResult HttpBackend::complete(const Transcript& t) {
  std::uint64_t key = transcript_key(t);
  std::size_t known = 0;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = exact_prompt_tokens_.find(key);
    if (it != exact_prompt_tokens_.end()) known = it->second;
  }
  check_context(t, known);

  nlohmann::json body;
  body["model"] = config_.model_id;
  auto& messages = body["messages"] = nlohmann::json::array();
  for (const auto& m : t.messages) {
    messages.push_back({{"role", role_name(m.role)}, {"content", m.content}});
  }
  // Deliberately no temperature/top_p/top_k: the serving side's defaults apply.

  httplib::Client client(origin_);
  auto timeout_s = std::chrono::duration<double>(config_.request_timeout_s);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(timeout_s));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(timeout_s));
  client.set_write_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(timeout_s));

  httplib::Headers headers;
  if (const char* api_key = std::getenv("SKILLBENCH_API_KEY"); api_key && *api_key) {
    headers.emplace("Authorization", std::string("Bearer ") + api_key);
  }

  auto started = std::chrono::steady_clock::now();
  auto res = client.Post(path_prefix_ + "/chat/completions", headers, body.dump(),
                         "application/json");
  double latency =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  if (!res) {
    throw Error(ErrorCode::TransportError, httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::TransportError,
                "status " + std::to_string(res->status) + " from " + origin_);
  }

  auto parsed = nlohmann::json::parse(res->body, nullptr, false);
  if (parsed.is_discarded() || !parsed.contains("choices") || !parsed["choices"].is_array() ||
      parsed["choices"].empty() || !parsed["choices"][0].contains("message") ||
      !parsed["choices"][0]["message"].contains("content") ||
      !parsed["choices"][0]["message"]["content"].is_string()) {
    throw Error(ErrorCode::TransportError, "malformed chat-completions response body");
  }

  CompletionResult result;
  result.text = parsed["choices"][0]["message"]["content"].get<std::string>();
  result.latency_s = latency;
  if (parsed.contains("usage") && parsed["usage"].is_object()) {
    const auto& usage = parsed["usage"];
    if (usage.contains("prompt_tokens") && usage["prompt_tokens"].is_number_unsigned()) {
      result.prompt_tokens = usage["prompt_tokens"].get<std::size_t>();
    }
    if (usage.contains("completion_tokens") && usage["completion_tokens"].is_number_unsigned()) {
      result.completion_tokens = usage["completion_tokens"].get<std::size_t>();
    }
  }
  if (result.prompt_tokens > 0) {
    std::lock_guard<std::mutex> lock(mutex_);
    exact_prompt_tokens_[key] = result.prompt_tokens;
  }
  return result;
}

// ---- mock -------------------------------------------------------------------

MockBackend::MockBackend(BackendConfig config, ScriptedResponses script)
    : Backend(std::move(config)), script_(std::move(script)) {}

CompletionResult MockBackend::complete(const Transcript& t) {
  check_context(t);
  std::lock_guard<std::mutex> lock(mutex_);
  if (script_.cursor >= script_.responses.size()) {
    throw Error(ErrorCode::ScriptExhausted,
                "script of " + std::to_string(script_.responses.size()) + " responses exhausted");
  }
  const ScriptedResponse& next = script_.responses[script_.cursor++];
  return CompletionResult{next.text, next.latency_s, 0, 0};
}

std::size_t MockBackend::cursor() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return script_.cursor;
}

// ---- heuristic --------------------------------------------------------------

std::vector<std::string> tokenize_words(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

namespace {

std::set<std::string> token_set(const std::string& text) {
  auto tokens = tokenize_words(text);
  return {tokens.begin(), tokens.end()};
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& token : a) inter += b.count(token);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

}  // namespace

SelectionResponse heuristic_select(const std::string& task, const SkillHub& hub) {
  if (hub.empty()) throw Error(ErrorCode::EmptyInput, "empty hub");
  auto task_tokens = token_set(task);
  if (task_tokens.empty()) throw Error(ErrorCode::EmptyInput, "task has no alphanumeric token");

  double best_score = 0.0;
  std::string best_name;
  for (const auto& [name, skill] : hub.skills) {  // name order, so ties keep the smaller
    double score = jaccard(task_tokens, token_set(name + " " + skill.descriptor.description));
    if (score > best_score) {
      best_score = score;
      best_name = name;
    }
  }

  SelectionResponse response;
  if (best_score > 0.0) {
    response.message = std::string(templates::kSelectionFoundMessagePrefix) +
                       "the task matches " + best_name + ".";
    response.skills.push_back(best_name);
  } else {
    response.message = std::string(templates::kSelectionNotFoundMessage);
  }
  return response;
}

namespace {

// Descriptor lines as rendered by the selection prompt: "- <name>: <desc>".
SkillHub hub_from_descriptor_lines(const std::string& system_content) {
  SkillHub hub;
  std::istringstream stream(system_content);
  std::string line;
  while (std::getline(stream, line)) {
    if (line.rfind("- ", 0) != 0) continue;
    auto colon = line.find(": ", 2);
    if (colon == std::string::npos) continue;
    std::string name = line.substr(2, colon - 2);
    if (!is_valid_skill_name(name)) continue;
    Skill skill;
    skill.descriptor.name = name;
    skill.descriptor.description = line.substr(colon + 2);
    hub.skills.emplace(name, std::move(skill));
  }
  return hub;
}

}  // namespace

HeuristicBackend::HeuristicBackend(BackendConfig config) : Backend(std::move(config)) {}

CompletionResult HeuristicBackend::complete(const Transcript& t) {
  check_context(t);

  const ChatMessage* system = nullptr;
  const ChatMessage* last_user = nullptr;
  for (const auto& m : t.messages) {
    if (m.role == Role::System && !system) system = &m;
    if (m.role == Role::User) last_user = &m;
  }

  // Selection prompts list descriptors under "**Available ...**"; execution
  // and FSI prompts carry the "Information Collected" context block instead.
  bool selection_phase = system && system->content.find("**Available ") != std::string::npos &&
                         system->content.find("Information Collected") == std::string::npos;

  CompletionResult result;
  result.latency_s = 0.0;
  if (selection_phase) {
    SkillHub hub = hub_from_descriptor_lines(system->content);
    std::string task = last_user ? last_user->content : "";
    result.text = selection_response_to_json(heuristic_select(task, hub));
  } else {
    // Routing is the aspect this backend models; execution answers are a
    // fixed placeholder.
    result.text = R"({"Message": "positive"})";
  }
  return result;
}

std::unique_ptr<Backend> make_backend(const BackendConfig& config, ScriptedResponses script) {
  switch (config.kind) {
    case BackendKind::Http: return std::make_unique<HttpBackend>(config);
    case BackendKind::Mock: return std::make_unique<MockBackend>(config, std::move(script));
    case BackendKind::Heuristic: return std::make_unique<HeuristicBackend>(config);
  }
  throw Error(ErrorCode::ConfigError, "unreachable backend kind");
}

ScriptedResponses load_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read script " + path);
  auto parsed = nlohmann::json::parse(in, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_array()) {
    throw Error(ErrorCode::ConfigError, "script must be a JSON array: " + path);
  }
  ScriptedResponses script;
  for (const auto& item : parsed) {
    if (item.is_string()) {
      script.responses.push_back({item.get<std::string>(), 0.0});
    } else if (item.is_object() && item.contains("text") && item["text"].is_string()) {
      ScriptedResponse r{item["text"].get<std::string>(), 0.0};
      if (item.contains("latency_s") && item["latency_s"].is_number()) {
        r.latency_s = item["latency_s"].get<double>();
      }
      script.responses.push_back(std::move(r));
    } else {
      throw Error(ErrorCode::ConfigError, "script entries must be strings or {text, latency_s}");
    }
  }
  return script;
}

std::optional<double> default_vram_gb(const std::string& model_id) {
  std::string lower;
  for (char c : model_id) {
    lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  struct Entry {
    const char* prefix;
    double gb;
  };
  static const Entry table[] = {
      {"gemma-3-270m", 1.0}, {"gemma-3-4b", 10.0},  {"gemma-3-12b", 29.0},
      {"qwen3-30b", 72.0},   {"qwen3-80b", 192.0},
  };
  for (const auto& entry : table) {
    if (lower.rfind(entry.prefix, 0) == 0) return entry.gb;
  }
  return std::nullopt;
}

}  // namespace skillbench
