#include "skillbench/skill.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace fs = std::filesystem;

namespace skillbench {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFrontmatter: return "MissingFrontmatter";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::InvalidName: return "InvalidName";
    case ErrorCode::DuplicateSkillName: return "DuplicateSkillName";
    case ErrorCode::InsufficientPool: return "InsufficientPool";
    case ErrorCode::EmptyHub: return "EmptyHub";
    case ErrorCode::EmptySelection: return "EmptySelection";
    case ErrorCode::ParseFailure: return "ParseFailure";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::ContextOverflow: return "ContextOverflow";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::ScriptExhausted: return "ScriptExhausted";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::ImpossibleObservation: return "ImpossibleObservation";
    case ErrorCode::StateSpaceTooLarge: return "StateSpaceTooLarge";
    case ErrorCode::InvalidModel: return "InvalidModel";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Error";
}

namespace {

std::string trim(const std::string& s) {
  auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

bool is_name_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-';
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string current;
  for (char c : text) {
    if (c == '\n') {
      lines.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  lines.push_back(current);
  return lines;
}

bool is_delimiter(const std::string& line) { return trim(line) == "---"; }

}  // namespace

bool is_valid_skill_name(const std::string& name) {
  // [a-z0-9]+(-[a-z0-9]+)*
  if (name.empty() || name.front() == '-' || name.back() == '-') return false;
  bool prev_dash = false;
  for (char c : name) {
    if (c == '-') {
      if (prev_dash) return false;
      prev_dash = true;
    } else if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
      prev_dash = false;
    } else {
      return false;
    }
  }
  return true;
}

Skill parse_skill_file(const std::string& text, const std::string& source_path) {
  auto lines = split_lines(text);

  std::size_t open = lines.size();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_delimiter(lines[i])) { open = i; break; }
    if (!trim(lines[i]).empty()) break;  // content before the frontmatter
  }
  if (open == lines.size()) {
    throw Error(ErrorCode::MissingFrontmatter,
                source_path + ":1: no leading '---' frontmatter block");
  }
  std::size_t close = lines.size();
  for (std::size_t i = open + 1; i < lines.size(); ++i) {
    if (is_delimiter(lines[i])) { close = i; break; }
  }
  if (close == lines.size()) {
    throw Error(ErrorCode::MissingFrontmatter,
                source_path + ":" + std::to_string(open + 1) + ": frontmatter never closed");
  }

  std::map<std::string, std::string> fields;
  for (std::size_t i = open + 1; i < close; ++i) {
    const std::string& line = lines[i];
    if (trim(line).empty()) continue;
    auto colon = line.find(':');
    if (colon == std::string::npos) continue;  // tolerated: not a key: value line
    std::string key = trim(line.substr(0, colon));
    std::string value = trim(line.substr(colon + 1));
    if (!key.empty()) fields[key] = value;
  }

  auto require = [&](const char* key) -> const std::string& {
    auto it = fields.find(key);
    if (it == fields.end() || it->second.empty()) {
      throw Error(ErrorCode::MissingField,
                  source_path + ":" + std::to_string(open + 1) + ": frontmatter lacks '" +
                      key + "'");
    }
    return it->second;
  };

  Skill skill;
  skill.descriptor.name = require("name");
  skill.descriptor.description = require("description");
  skill.descriptor.source_path = source_path;
  if (!is_valid_skill_name(skill.descriptor.name)) {
    throw Error(ErrorCode::InvalidName,
                source_path + ":" + std::to_string(open + 1) + ": '" + skill.descriptor.name +
                    "' is not kebab-case");
  }

  std::string body;
  for (std::size_t i = close + 1; i < lines.size(); ++i) {
    body += lines[i];
    if (i + 1 < lines.size()) body += '\n';
  }
  skill.body = body;

  skill.references = extract_references(body);
  std::erase(skill.references, skill.descriptor.name);
  return skill;
}

std::string serialize_skill(const Skill& skill) {
  std::string out = "---\n";
  out += "name: " + skill.descriptor.name + "\n";
  out += "description: " + skill.descriptor.description + "\n";
  out += "---\n";
  out += skill.body;
  return out;
}

std::vector<std::string> extract_references(const std::string& body) {
  // Collected as (position, name), then ordered by first occurrence.
  std::vector<std::pair<std::size_t, std::string>> found;

  // Markdown link targets ending in SKILL.md: the parent directory names them.
  std::size_t pos = 0;
  while ((pos = body.find("](", pos)) != std::string::npos) {
    std::size_t start = pos + 2;
    std::size_t end = body.find(')', start);
    if (end == std::string::npos) break;
    std::string target = trim(body.substr(start, end - start));
    pos = end;
    const std::string suffix = "SKILL.md";
    if (target.size() <= suffix.size() ||
        target.compare(target.size() - suffix.size(), suffix.size(), suffix) != 0) {
      continue;
    }
    std::string dir = target.substr(0, target.size() - suffix.size());
    if (dir.empty() || dir.back() != '/') continue;
    dir.pop_back();
    auto slash = dir.find_last_of('/');
    std::string parent = slash == std::string::npos ? dir : dir.substr(slash + 1);
    if (is_valid_skill_name(parent)) found.emplace_back(start, parent);
  }

  // Inline skill:<name> tokens.
  pos = 0;
  const std::string tag = "skill:";
  while ((pos = body.find(tag, pos)) != std::string::npos) {
    std::size_t start = pos + tag.size();
    std::size_t end = start;
    while (end < body.size() && is_name_char(body[end])) ++end;
    std::string name = body.substr(start, end - start);
    if (is_valid_skill_name(name)) found.emplace_back(pos, name);
    pos = end;
  }

  std::sort(found.begin(), found.end());
  std::vector<std::string> refs;
  for (auto& [p, name] : found) {
    if (std::find(refs.begin(), refs.end(), name) == refs.end()) refs.push_back(name);
  }
  return refs;
}

namespace {

std::vector<fs::path> skill_files_under(const std::string& directory) {
  fs::path root(directory);
  if (!fs::exists(root) || !fs::is_directory(root)) {
    throw Error(ErrorCode::IoError, "not a directory: " + directory);
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    fs::path candidate = entry.path() / "SKILL.md";
    if (fs::exists(candidate)) files.push_back(candidate);
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

SkillHub load_hub(const std::string& directory) {
  SkillHub hub;
  for (const auto& file : skill_files_under(directory)) {
    Skill skill = parse_skill_file(read_file(file), file.string());
    auto [it, inserted] = hub.skills.emplace(skill.name(), skill);
    if (!inserted) {
      throw Error(ErrorCode::DuplicateSkillName,
                  file.string() + ": duplicate skill name '" + skill.name() + "'");
    }
  }
  return hub;
}

std::vector<SkillFileReport> scan_hub_dir(const std::string& directory) {
  std::vector<SkillFileReport> reports;
  std::map<std::string, std::string> seen;  // name -> path
  for (const auto& file : skill_files_under(directory)) {
    SkillFileReport report;
    report.path = file.string();
    try {
      Skill skill = parse_skill_file(read_file(file), file.string());
      auto it = seen.find(skill.name());
      if (it != seen.end()) {
        report.error = "duplicate skill name '" + skill.name() + "' (also in " + it->second + ")";
      } else {
        seen[skill.name()] = file.string();
        report.skill = std::move(skill);
      }
    } catch (const Error& e) {
      report.error = e.what();
    }
    reports.push_back(std::move(report));
  }
  return reports;
}

SkillHub build_trial_hub(const Skill& ground_truth, const std::vector<Skill>& pool,
                         std::size_t n_distractors, std::uint64_t seed) {
  for (const auto& s : pool) {
    if (s.name() == ground_truth.name()) {
      throw Error(ErrorCode::InvalidName,
                  "pool contains the ground-truth skill '" + ground_truth.name() + "'");
    }
  }
  if (pool.size() < n_distractors) {
    throw Error(ErrorCode::InsufficientPool,
                "have " + std::to_string(pool.size()) + ", need " + std::to_string(n_distractors));
  }

  std::vector<const Skill*> sorted;
  sorted.reserve(pool.size());
  for (const auto& s : pool) sorted.push_back(&s);
  std::sort(sorted.begin(), sorted.end(),
            [](const Skill* a, const Skill* b) { return a->name() < b->name(); });

  // Partial Fisher-Yates; modulo draws keep the sequence identical across
  // platforms (mt19937_64 output is pinned by the standard).
  std::mt19937_64 gen(seed);
  for (std::size_t i = 0; i < n_distractors; ++i) {
    std::size_t j = i + static_cast<std::size_t>(gen() % (sorted.size() - i));
    std::swap(sorted[i], sorted[j]);
  }

  SkillHub hub;
  hub.skills.emplace(ground_truth.name(), ground_truth);
  for (std::size_t i = 0; i < n_distractors; ++i) {
    hub.skills.emplace(sorted[i]->name(), *sorted[i]);
  }
  hub.ground_truth = ground_truth.name();
  return hub;
}

}  // namespace skillbench
