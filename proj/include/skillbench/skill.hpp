#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "skillbench/error.hpp"

namespace skillbench {

// One skill = descriptor (name + description), workflow body, and the names of
// other skills its body refers to.
struct SkillDescriptor {
  std::string name;         // kebab-case identifier
  std::string description;  // one-line free text
  std::string source_path;  // where the SKILL.md came from ("" for in-memory skills)
};

struct Skill {
  SkillDescriptor descriptor;
  std::string body;                      // markdown after the frontmatter block
  std::vector<std::string> references;   // deduplicated, never contains own name

  const std::string& name() const { return descriptor.name; }
};

// A named collection of skills, optionally tagged with the ground-truth entry
// for a trial. Immutable by convention once built.
struct SkillHub {
  std::map<std::string, Skill> skills;
  std::optional<std::string> ground_truth;

  bool empty() const { return skills.empty(); }
  std::size_t size() const { return skills.size(); }
  bool contains(const std::string& name) const { return skills.count(name) != 0; }
};

bool is_valid_skill_name(const std::string& name);

// Parses a SKILL.md document: `---`-delimited frontmatter with flat
// `key: value` lines, body is everything after the closing delimiter.
// Throws Error{MissingFrontmatter|MissingField|InvalidName}.
Skill parse_skill_file(const std::string& text, const std::string& source_path);

// Inverse of parse_skill_file on (name, description, body).
std::string serialize_skill(const Skill& skill);

// Skill names referenced by a markdown body, in order of first occurrence:
// markdown link targets ending in SKILL.md contribute their parent directory
// name, and inline `skill:<name>` tokens contribute <name>. Deduplicated.
std::vector<std::string> extract_references(const std::string& body);

// Loads every */SKILL.md one level under `directory`.
// Throws Error{DuplicateSkillName} and propagates parse errors.
SkillHub load_hub(const std::string& directory);

// Per-file outcome used by the `validate` command: either a parsed skill or
// the error message for that path.
struct SkillFileReport {
  std::string path;
  std::optional<Skill> skill;
  std::string error;  // empty iff skill is set
};
std::vector<SkillFileReport> scan_hub_dir(const std::string& directory);

// ground_truth plus n_distractors skills sampled without replacement from
// pool (sorted by name, partial Fisher-Yates over mt19937_64(seed), index
// draws by modulo). Same inputs give an identical hub on any platform.
SkillHub build_trial_hub(const Skill& ground_truth, const std::vector<Skill>& pool,
                         std::size_t n_distractors, std::uint64_t seed);

}  // namespace skillbench
