#pragma once

#include <string>
#include <vector>

#include "skillbench/skill.hpp"

namespace skillbench {

enum class Role { System, User, Assistant };

const char* role_name(Role role);
Role role_from_name(const std::string& name);

struct ChatMessage {
  Role role;
  std::string content;

  static ChatMessage system(std::string content) { return {Role::System, std::move(content)}; }
  static ChatMessage user(std::string content) { return {Role::User, std::move(content)}; }
  static ChatMessage assistant(std::string content) {
    return {Role::Assistant, std::move(content)};
  }
};

// Ordered conversation; at most one system message and it comes first.
struct Transcript {
  std::vector<ChatMessage> messages;

  std::size_t size() const { return messages.size(); }
  Transcript& add(ChatMessage m) {
    messages.push_back(std::move(m));
    return *this;
  }
};

// Strict-JSON response shapes the model is instructed to emit.
struct SelectionResponse {
  std::string message;
  std::vector<std::string> skills;  // deduplicated, selection order
};

struct ExecutionResponse {
  std::string message;
  bool degraded = false;  // raw-text fallback was used
};

// Synonym substituted for the word "skill" in prompt scaffolding (Skill,
// Capability, Expertise, Proficiency, Know-how, or any custom word).
struct KeywordVariant {
  std::string keyword = "Skill";

  bool is_identity() const;
};

enum class Strategy { DI, FSI, ASI, ASIH };
const char* strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

// ---- rendering ------------------------------------------------------------

// Selection phase: system prompt lists one `- <name>: <description>` line per
// skill (name order), user message is the task. Throws Error{EmptyHub}.
Transcript render_selection_prompt(const SkillHub& hub, const std::string& task,
                                   const KeywordVariant& keyword = {});

// Execution phase: system prompt embeds the selected skills' descriptors and
// full bodies, in selection order. Throws Error{EmptySelection}.
Transcript render_execution_prompt(const std::vector<Skill>& selected, const std::string& task,
                                   const KeywordVariant& keyword = {});

// DI: a single user message with the bare task. FSI: system prompt embedding
// every skill's descriptor and body, user message is the task.
Transcript render_strategy_prompt(Strategy strategy, const SkillHub& hub, const std::string& task,
                                  const KeywordVariant& keyword = {});

// ---- parsing ---------------------------------------------------------------

// Extracts the first parseable JSON object from raw model output (markdown
// fences and surrounding chatter are skipped) and validates {"Message":
// string, "Skills": [string...]}. Duplicate skills dropped, order kept.
// Throws Error{ParseFailure|SchemaViolation}.
SelectionResponse parse_selection_json(const std::string& raw);

// Same extraction for {"Message": string}. When no parseable JSON object
// exists the raw text itself becomes the message, flagged degraded.
ExecutionResponse parse_execution_json(const std::string& raw);

std::string selection_response_to_json(const SelectionResponse& response);

// ---- history & keywords ----------------------------------------------------

// Appendix-style trimming: transcripts of more than 5 messages keep message 0
// plus the most recent 3 (even count) or 4 (odd count) messages.
Transcript trim_history(const Transcript& t);

// Replaces whole-word skill/skills (lower or capitalized) in prompt
// scaffolding with the case- and plural-matched variant. Quoted JSON keys
// ("Skills":) are wire format and stay untouched.
std::string substitute_keyword(const std::string& text, const KeywordVariant& keyword);

// Generalized form used for round-trip checks: rewrites `from` word forms
// into `to` word forms.
std::string substitute_keyword(const std::string& text, const KeywordVariant& from,
                               const KeywordVariant& to);

// Four word forms of a keyword: lower/capitalized x singular/plural.
// "Expertise" is plural-invariant; "Know-how" pluralizes to "Know-hows".
struct KeywordForms {
  std::string lower_singular;
  std::string lower_plural;
  std::string cap_singular;
  std::string cap_plural;
};
KeywordForms keyword_forms(const KeywordVariant& keyword);

}  // namespace skillbench
