#pragma once

#include <optional>
#include <string>
#include <vector>

#include "skillbench/error.hpp"
#include "skillbench/prompt.hpp"

// Per-trial outcome records and the five benchmark metrics: classification
// accuracy, F1, skill (routing) accuracy, mean generation time, and mean
// VRAM-time. All aggregation is exactly order-independent: counts are
// integers and real-valued means are computed over sorted values with
// compensated summation.

namespace skillbench {

struct TrialRecord {
  std::string id;
  Strategy strategy = Strategy::DI;
  std::optional<std::string> predicted_label;  // absent when the trial failed
  std::string gold_label;
  std::optional<std::vector<std::string>> selected_skills;  // ASI/ASIH only
  std::optional<std::string> gold_skill;                    // ASI/ASIH only
  double gt_minutes = 0.0;
  double vram_gb = 0.0;
  bool degraded = false;           // execution answer recovered via raw-text fallback
  bool routing_violation = false;  // selection named a skill outside the trial hub
};

std::string record_to_json_line(const TrialRecord& record);
TrialRecord record_from_json_line(const std::string& line);

std::vector<TrialRecord> load_records(const std::string& path);
void save_records(const std::string& path, const std::vector<TrialRecord>& records);

enum class SkillMode { Lenient, Strict };
SkillMode skill_mode_from_name(const std::string& name);
const char* skill_mode_name(SkillMode mode);

enum class F1Averaging { Macro, Micro };

struct Aggregate {
  double cls_acc = 0.0;
  double cls_f1 = 0.0;
  std::optional<double> skill_acc;  // absent for strategies without routing
  double avg_gt_min = 0.0;
  double avg_vram_time = 0.0;
  std::size_t n = 0;
};

// Exact-match fraction; an absent prediction counts as wrong.
double classification_accuracy(const std::vector<TrialRecord>& records);

// Per-class F1 over the union of gold and predicted classes, macro-averaged.
double macro_f1(const std::vector<TrialRecord>& records);
double f1_score(const std::vector<TrialRecord>& records, F1Averaging averaging);

// Lenient: the gold skill appears among the selected ones. Strict: the
// selection is exactly [gold]. Absent selections miss in both modes.
double skill_accuracy(const std::vector<TrialRecord>& records, SkillMode mode);

// GPU-residency cost of one trial: GB held times minutes held.
double vram_time(double vram_gb, double gt_minutes);

// All five metrics in one pass; skill_acc is present only when every record
// carries a gold skill.
Aggregate aggregate(const std::vector<TrialRecord>& records, SkillMode mode = SkillMode::Lenient,
                    F1Averaging averaging = F1Averaging::Macro);

// Sorted compensated mean — permutation-invariant bit-for-bit.
double stable_mean(std::vector<double> values);

// CSV with header cls_acc,cls_f1,skill_acc,avg_gt_min,avg_vram_time,n and a
// single 3-decimal row; absent skill_acc renders as "-".
std::string aggregate_to_csv(const Aggregate& agg);

}  // namespace skillbench
