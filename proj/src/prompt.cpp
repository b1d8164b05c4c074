#include "skillbench/prompt.hpp"

#include <algorithm>
#include <cctype>

#include <nlohmann/json.hpp>

#include "skillbench/templates.hpp"

namespace skillbench {

const char* role_name(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

Role role_from_name(const std::string& name) {
  if (name == "system") return Role::System;
  if (name == "assistant") return Role::Assistant;
  if (name == "user") return Role::User;
  throw Error(ErrorCode::SchemaViolation, "unknown role '" + name + "'");
}

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::DI: return "DI";
    case Strategy::FSI: return "FSI";
    case Strategy::ASI: return "ASI";
    case Strategy::ASIH: return "ASIH";
  }
  return "DI";
}

Strategy strategy_from_name(const std::string& name) {
  std::string lower;
  for (char c : name) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (lower == "di") return Strategy::DI;
  if (lower == "fsi") return Strategy::FSI;
  if (lower == "asi") return Strategy::ASI;
  if (lower == "asih") return Strategy::ASIH;
  throw Error(ErrorCode::ConfigError, "unknown strategy '" + name + "'");
}

// ---- keyword forms ----------------------------------------------------------

namespace {

std::string to_lower(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return out;
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::string pluralize(const std::string& lower) {
  if (lower == "expertise") return lower;  // mass noun, no plural form
  if (lower.size() >= 2 && lower.back() == 'y') {
    char prev = lower[lower.size() - 2];
    if (prev != 'a' && prev != 'e' && prev != 'i' && prev != 'o' && prev != 'u') {
      return lower.substr(0, lower.size() - 1) + "ies";
    }
  }
  return lower + "s";
}

bool is_word_char(char c) {
  // Hyphen counts so kebab-case skill names never match a bare keyword.
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '-';
}

// `"Skills":` and friends are response-schema keys, not scaffolding.
bool is_quoted_json_key(const std::string& text, std::size_t begin, std::size_t end) {
  if (begin == 0 || text[begin - 1] != '"') return false;
  if (end >= text.size() || text[end] != '"') return false;
  std::size_t i = end + 1;
  while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
  return i < text.size() && text[i] == ':';
}

}  // namespace

bool KeywordVariant::is_identity() const { return to_lower(keyword) == "skill"; }

KeywordForms keyword_forms(const KeywordVariant& keyword) {
  std::string lower = to_lower(keyword.keyword);
  std::string plural = pluralize(lower);
  return KeywordForms{lower, plural, capitalize(lower), capitalize(plural)};
}

std::string substitute_keyword(const std::string& text, const KeywordVariant& from,
                               const KeywordVariant& to) {
  if (to_lower(from.keyword) == to_lower(to.keyword)) return text;
  KeywordForms source = keyword_forms(from);
  KeywordForms target = keyword_forms(to);

  // Plural forms first so "skills" never half-matches as "skill".
  const std::pair<const std::string*, const std::string*> table[] = {
      {&source.cap_plural, &target.cap_plural},
      {&source.lower_plural, &target.lower_plural},
      {&source.cap_singular, &target.cap_singular},
      {&source.lower_singular, &target.lower_singular},
  };

  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    bool replaced = false;
    if (i == 0 || !is_word_char(text[i - 1])) {
      for (const auto& [word, replacement] : table) {
        if (word->empty() || text.compare(i, word->size(), *word) != 0) continue;
        std::size_t end = i + word->size();
        if (end < text.size() && is_word_char(text[end])) continue;
        if (is_quoted_json_key(text, i, end)) continue;
        out += *replacement;
        i = end;
        replaced = true;
        break;
      }
    }
    if (!replaced) {
      out.push_back(text[i]);
      ++i;
    }
  }
  return out;
}

std::string substitute_keyword(const std::string& text, const KeywordVariant& keyword) {
  return substitute_keyword(text, KeywordVariant{"Skill"}, keyword);
}

// ---- rendering --------------------------------------------------------------

namespace {

// Splits the template at the context placeholder, substitutes the keyword in
// the scaffolding halves only, and splices the context verbatim.
std::string instantiate_template(std::string_view tpl, const std::string& context,
                                 const KeywordVariant& keyword) {
  std::string text(tpl);
  auto pos = text.find(templates::kSkillContextPlaceholder);
  if (pos == std::string::npos) {
    return substitute_keyword(text, keyword);
  }
  std::string pre = text.substr(0, pos);
  std::string post = text.substr(pos + templates::kSkillContextPlaceholder.size());
  return substitute_keyword(pre, keyword) + context + substitute_keyword(post, keyword);
}

std::string descriptor_lines(const SkillHub& hub) {
  std::string out;
  bool first = true;
  for (const auto& [name, skill] : hub.skills) {
    if (!first) out += '\n';
    out += "- " + name + ": " + skill.descriptor.description;
    first = false;
  }
  return out;
}

std::string skill_block(const Skill& skill) {
  return "### " + skill.name() + "\n\n" + skill.descriptor.description + "\n\n" + skill.body;
}

}  // namespace

Transcript render_selection_prompt(const SkillHub& hub, const std::string& task,
                                   const KeywordVariant& keyword) {
  if (hub.empty()) throw Error(ErrorCode::EmptyHub, "selection prompt needs at least one skill");
  Transcript t;
  t.add(ChatMessage::system(
      instantiate_template(templates::kSelectionSystem, descriptor_lines(hub), keyword)));
  t.add(ChatMessage::user(task));
  return t;
}

Transcript render_execution_prompt(const std::vector<Skill>& selected, const std::string& task,
                                   const KeywordVariant& keyword) {
  if (selected.empty()) throw Error(ErrorCode::EmptySelection, "no skills selected");
  std::string context;
  for (std::size_t i = 0; i < selected.size(); ++i) {
    if (i > 0) context += "\n\n";
    context += skill_block(selected[i]);
  }
  Transcript t;
  t.add(ChatMessage::system(instantiate_template(templates::kExecutionSystem, context, keyword)));
  t.add(ChatMessage::user(task));
  return t;
}

Transcript render_strategy_prompt(Strategy strategy, const SkillHub& hub, const std::string& task,
                                  const KeywordVariant& keyword) {
  switch (strategy) {
    case Strategy::DI: {
      Transcript t;
      t.add(ChatMessage::user(task));
      return t;
    }
    case Strategy::FSI: {
      if (hub.empty()) throw Error(ErrorCode::EmptyHub, "FSI needs a non-empty hub");
      std::vector<Skill> all;
      all.reserve(hub.size());
      for (const auto& [name, skill] : hub.skills) all.push_back(skill);
      return render_execution_prompt(all, task, keyword);
    }
    default:
      throw Error(ErrorCode::ConfigError,
                  "render_strategy_prompt handles DI and FSI only; ASI phases are rendered "
                  "separately");
  }
}

// ---- parsing ----------------------------------------------------------------

namespace {

std::string trim_copy(const std::string& s) {
  auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::string excerpt(const std::string& raw) {
  std::string e = trim_copy(raw).substr(0, 80);
  for (char& c : e) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return e;
}

// First substring that scans as a balanced object and parses as JSON.
std::optional<nlohmann::json> extract_first_json_object(const std::string& raw) {
  for (std::size_t start = raw.find('{'); start != std::string::npos;
       start = raw.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < raw.size(); ++i) {
      char c = raw[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        --depth;
        if (depth == 0) {
          auto parsed =
              nlohmann::json::parse(raw.substr(start, i - start + 1), nullptr, false);
          if (!parsed.is_discarded() && parsed.is_object()) return parsed;
          break;  // balanced but not JSON; try the next '{'
        }
      }
    }
  }
  return std::nullopt;
}

}  // namespace

SelectionResponse parse_selection_json(const std::string& raw) {
  auto object = extract_first_json_object(raw);
  if (!object) {
    throw Error(ErrorCode::ParseFailure, "no JSON object in: " + excerpt(raw));
  }
  const nlohmann::json& j = *object;
  if (!j.contains("Message") || !j["Message"].is_string()) {
    throw Error(ErrorCode::SchemaViolation, "missing or non-string \"Message\"");
  }
  if (!j.contains("Skills") || !j["Skills"].is_array()) {
    throw Error(ErrorCode::SchemaViolation, "missing or non-array \"Skills\"");
  }
  SelectionResponse response;
  response.message = j["Message"].get<std::string>();
  for (const auto& item : j["Skills"]) {
    if (!item.is_string()) {
      throw Error(ErrorCode::SchemaViolation, "\"Skills\" entries must be strings");
    }
    std::string name = item.get<std::string>();
    if (std::find(response.skills.begin(), response.skills.end(), name) ==
        response.skills.end()) {
      response.skills.push_back(std::move(name));
    }
  }
  return response;
}

ExecutionResponse parse_execution_json(const std::string& raw) {
  auto object = extract_first_json_object(raw);
  if (!object) {
    std::string fallback = trim_copy(raw);
    if (fallback.empty()) {
      throw Error(ErrorCode::ParseFailure, "empty model output");
    }
    return ExecutionResponse{std::move(fallback), true};
  }
  const nlohmann::json& j = *object;
  if (!j.contains("Message") || !j["Message"].is_string()) {
    throw Error(ErrorCode::SchemaViolation, "missing or non-string \"Message\"");
  }
  ExecutionResponse response;
  response.message = j["Message"].get<std::string>();
  if (response.message.empty()) {
    throw Error(ErrorCode::SchemaViolation, "\"Message\" must be non-empty");
  }
  return response;
}

std::string selection_response_to_json(const SelectionResponse& response) {
  nlohmann::ordered_json j;
  j["Message"] = response.message;
  j["Skills"] = response.skills;
  return j.dump();
}

// ---- history ----------------------------------------------------------------

Transcript trim_history(const Transcript& t) {
  const std::size_t n = t.size();
  if (n <= 5) return t;
  const std::size_t keep_recent = (n % 2 == 0) ? 3 : 4;
  Transcript out;
  out.add(t.messages.front());
  for (std::size_t i = n - keep_recent; i < n; ++i) out.add(t.messages[i]);
  return out;
}

}  // namespace skillbench
