#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "skillbench/backend.hpp"
#include "skillbench/metrics.hpp"
#include "skillbench/prompt.hpp"
#include "skillbench/skill.hpp"

// Experiment orchestration: per-task trial hubs, strategy execution, hub-size
// sweeps with decay-curve fitting, keyword ablations, and seeded synthetic
// dataset generation for offline runs.

namespace skillbench {

struct Task {
  std::string id;
  std::string input_text;
  std::string gold_label;
  std::string gold_skill;
};

std::vector<Task> load_dataset(const std::string& path);
void save_dataset(const std::string& path, const std::vector<Task>& tasks);

struct ExperimentSpec {
  Strategy strategy = Strategy::ASI;
  std::string dataset_path;
  std::string skills_dir;
  BackendConfig backend;
  std::uint64_t seed = 0;
  std::size_t n_distractors = 5;
  KeywordVariant keyword;  // identity by default
  SkillMode skill_mode = SkillMode::Lenient;
  std::size_t parallelism = 1;
  ScriptedResponses script;  // replies for the mock backend
};

// Seed for one task's trial hub; XOR with a per-id hash so adding or removing
// tasks never perturbs the hubs of the others.
std::uint64_t trial_seed(std::uint64_t experiment_seed, const std::string& task_id);

struct PhaseTrace {
  std::string phase;  // "selection" or "execution"
  Transcript prompt;
  std::string response;
};

struct TrialTrace {
  std::string task_id;
  Strategy strategy = Strategy::DI;
  std::vector<PhaseTrace> phases;
};

std::string trace_to_json_line(const TrialTrace& trace);

struct TrialOutcome {
  TrialRecord record;
  TrialTrace trace;
};

// One task end to end. Backend and parse failures land in the record
// (prediction absent); only configuration problems (e.g. the gold skill
// missing from the hub) throw.
TrialOutcome run_trial(const ExperimentSpec& spec, const Task& task, const SkillHub& full_hub,
                       Backend& backend);

struct RunSinks {
  std::optional<std::string> records_path;      // JSONL, appended as trials finish
  std::optional<std::string> transcripts_path;  // JSONL trace per trial
};

struct ExperimentResult {
  std::vector<TrialRecord> records;  // dataset order regardless of parallelism
  Aggregate aggregate;
};

ExperimentResult run_experiment(const ExperimentSpec& spec, const RunSinks& sinks = {});
ExperimentResult run_experiment(const ExperimentSpec& spec, const std::vector<Task>& tasks,
                                const RunSinks& sinks = {});

struct SweepPoint {
  std::size_t n = 0;  // trial-hub size
  double skill_acc = 0.0;
};

// Selection-only routing accuracy at each hub size N, using N-1 distractors.
std::vector<SweepPoint> sweep_skill_count(const ExperimentSpec& spec,
                                          const std::vector<std::size_t>& counts,
                                          const std::vector<Task>& tasks);

struct DecayFit {
  double a = 0.0;       // level at the reference count
  double c = 0.0;       // asymptote
  double lambda = 0.0;  // decay rate
  double n0 = 0.0;      // reference count (smallest N in the data)
  double rss = 0.0;

  double operator()(double n) const;
};

// Least squares for acc(N) = c + (a-c)*exp(-lambda*(N-n0)) under
// 0 <= c <= a <= 1, lambda >= 0; never worse than the best constant fit.
DecayFit fit_decay_curve(const std::vector<std::pair<double, double>>& points);

std::string decay_fit_to_json(const DecayFit& fit);

// run_experiment once per keyword with identical seeds; isolates the effect
// of renaming "skill" across every template.
std::vector<std::pair<KeywordVariant, Aggregate>> synonym_sweep(
    const ExperimentSpec& spec, const std::vector<KeywordVariant>& keywords);

// Seeded task texts that embed 3-6 content words from a chosen skill's
// description amid fixed filler; labels drawn from {positive, negative}.
std::vector<Task> generate_synthetic_tasks(const SkillHub& hub, std::size_t n_tasks,
                                           std::uint64_t seed);

}  // namespace skillbench
