#include "skillbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace skillbench {

namespace {

void require_records(const std::vector<TrialRecord>& records) {
  if (records.empty()) throw Error(ErrorCode::EmptyInput, "no records to aggregate");
}

}  // namespace

std::string record_to_json_line(const TrialRecord& record) {
  nlohmann::ordered_json j;
  j["id"] = record.id;
  j["strategy"] = strategy_name(record.strategy);
  if (record.predicted_label) j["predicted_label"] = *record.predicted_label;
  j["gold_label"] = record.gold_label;
  if (record.selected_skills) j["selected_skills"] = *record.selected_skills;
  if (record.gold_skill) j["gold_skill"] = *record.gold_skill;
  j["gt_minutes"] = record.gt_minutes;
  j["vram_gb"] = record.vram_gb;
  j["degraded"] = record.degraded;
  if (record.routing_violation) j["routing_violation"] = true;
  return j.dump();
}

TrialRecord record_from_json_line(const std::string& line) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorCode::ParseFailure, "record line is not a JSON object");
  }
  TrialRecord r;
  try {
    r.id = j.at("id").get<std::string>();
    r.strategy = strategy_from_name(j.at("strategy").get<std::string>());
    if (j.contains("predicted_label")) r.predicted_label = j["predicted_label"].get<std::string>();
    r.gold_label = j.at("gold_label").get<std::string>();
    if (j.contains("selected_skills")) {
      r.selected_skills = j["selected_skills"].get<std::vector<std::string>>();
    }
    if (j.contains("gold_skill")) r.gold_skill = j["gold_skill"].get<std::string>();
    r.gt_minutes = j.at("gt_minutes").get<double>();
    r.vram_gb = j.at("vram_gb").get<double>();
    r.degraded = j.value("degraded", false);
    r.routing_violation = j.value("routing_violation", false);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseFailure, std::string("malformed record: ") + e.what());
  }
  if (r.gt_minutes < 0.0 || r.vram_gb < 0.0) {
    throw Error(ErrorCode::SchemaViolation, "gt_minutes and vram_gb must be >= 0");
  }
  return r;
}

std::vector<TrialRecord> load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open records file: " + path);
  std::vector<TrialRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(record_from_json_line(line));
  }
  return records;
}

void save_records(const std::string& path, const std::vector<TrialRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write records file: " + path);
  for (const TrialRecord& r : records) out << record_to_json_line(r) << '\n';
}

SkillMode skill_mode_from_name(const std::string& name) {
  if (name == "lenient") return SkillMode::Lenient;
  if (name == "strict") return SkillMode::Strict;
  throw Error(ErrorCode::ConfigError, "unknown skill mode '" + name + "'");
}

const char* skill_mode_name(SkillMode mode) {
  return mode == SkillMode::Lenient ? "lenient" : "strict";
}

double classification_accuracy(const std::vector<TrialRecord>& records) {
  require_records(records);
  std::size_t hits = 0;
  for (const TrialRecord& r : records) {
    if (r.predicted_label && *r.predicted_label == r.gold_label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

double f1_score(const std::vector<TrialRecord>& records, F1Averaging averaging) {
  require_records(records);

  // Integer confusion counts keyed by class name; std::map keeps the
  // per-class iteration order canonical regardless of record order.
  struct Counts {
    std::size_t tp = 0, fp = 0, fn = 0;
  };
  std::map<std::string, Counts> by_class;
  for (const TrialRecord& r : records) {
    if (r.predicted_label && *r.predicted_label == r.gold_label) {
      by_class[r.gold_label].tp++;
    } else {
      by_class[r.gold_label].fn++;
      if (r.predicted_label) by_class[*r.predicted_label].fp++;
    }
  }

  if (averaging == F1Averaging::Micro) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (const auto& [cls, c] : by_class) {
      tp += c.tp;
      fp += c.fp;
      fn += c.fn;
    }
    const double denom = static_cast<double>(2 * tp + fp + fn);
    return denom == 0.0 ? 0.0 : static_cast<double>(2 * tp) / denom;
  }

  double sum = 0.0;
  std::size_t classes = 0;
  for (const auto& [cls, c] : by_class) {
    if (c.tp + c.fp + c.fn == 0) continue;  // never gold, never predicted
    const double denom = static_cast<double>(2 * c.tp + c.fp + c.fn);
    sum += static_cast<double>(2 * c.tp) / denom;
    ++classes;
  }
  return classes == 0 ? 0.0 : sum / static_cast<double>(classes);
}

double macro_f1(const std::vector<TrialRecord>& records) {
  return f1_score(records, F1Averaging::Macro);
}

double skill_accuracy(const std::vector<TrialRecord>& records, SkillMode mode) {
  require_records(records);
  std::size_t hits = 0;
  for (const TrialRecord& r : records) {
    if (!r.gold_skill) {
      throw Error(ErrorCode::EmptyInput, "record '" + r.id + "' has no gold skill");
    }
    if (!r.selected_skills) continue;
    const std::vector<std::string>& sel = *r.selected_skills;
    const bool hit = mode == SkillMode::Lenient
                         ? std::find(sel.begin(), sel.end(), *r.gold_skill) != sel.end()
                         : sel.size() == 1 && sel.front() == *r.gold_skill;
    if (hit) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

double vram_time(double vram_gb, double gt_minutes) { return vram_gb * gt_minutes; }

double stable_mean(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  // Neumaier summation: exact enough that any permutation of the inputs
  // yields the same bits once sorted.
  double sum = 0.0, compensation = 0.0;
  for (double v : values) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      compensation += (sum - t) + v;
    } else {
      compensation += (v - t) + sum;
    }
    sum = t;
  }
  return (sum + compensation) / static_cast<double>(values.size());
}

Aggregate aggregate(const std::vector<TrialRecord>& records, SkillMode mode,
                    F1Averaging averaging) {
  require_records(records);
  Aggregate agg;
  agg.n = records.size();
  agg.cls_acc = classification_accuracy(records);
  agg.cls_f1 = f1_score(records, averaging);

  const bool routed = std::all_of(records.begin(), records.end(),
                                  [](const TrialRecord& r) { return r.gold_skill.has_value(); });
  if (routed) agg.skill_acc = skill_accuracy(records, mode);

  std::vector<double> gt, vt;
  gt.reserve(records.size());
  vt.reserve(records.size());
  for (const TrialRecord& r : records) {
    gt.push_back(r.gt_minutes);
    vt.push_back(vram_time(r.vram_gb, r.gt_minutes));
  }
  agg.avg_gt_min = stable_mean(std::move(gt));
  agg.avg_vram_time = stable_mean(std::move(vt));
  return agg;
}

std::string aggregate_to_csv(const Aggregate& agg) {
  std::ostringstream out;
  out << "cls_acc,cls_f1,skill_acc,avg_gt_min,avg_vram_time,n\n";
  out << std::fixed << std::setprecision(3);
  out << agg.cls_acc << ',' << agg.cls_f1 << ',';
  if (agg.skill_acc) {
    out << *agg.skill_acc;
  } else {
    out << '-';
  }
  out << ',' << agg.avg_gt_min << ',' << agg.avg_vram_time << ',' << agg.n << '\n';
  return out.str();
}

}  // namespace skillbench
