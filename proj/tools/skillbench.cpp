#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "skillbench/backend.hpp"
#include "skillbench/harness.hpp"
#include "skillbench/metrics.hpp"
#include "skillbench/pomdp.hpp"
#include "skillbench/skill.hpp"

namespace {

using skillbench::Error;
using skillbench::ErrorCode;

// Shortest round-trip rendering for data files (sweep CSV, belief grids);
// tables rendered for humans use fixed 3-decimal formatting instead.
std::string compact_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return ec == std::errc() ? std::string(buf, ptr) : std::to_string(v);
}

// CLI11 config reader for JSON files: top-level keys are global flag
// defaults, nested objects hold per-subcommand defaults. Flags given on the
// command line win.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json j = nlohmann::json::parse(input, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw CLI::FileError("config file is not a JSON object");
    }
    std::vector<CLI::ConfigItem> items;
    flatten({}, j, items);
    return items;
  }

 private:
  static std::string scalar(const nlohmann::json& v) {
    return v.is_string() ? v.get<std::string>() : v.dump();
  }

  static void flatten(const std::vector<std::string>& parents, const nlohmann::json& j,
                      std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        std::vector<std::string> nested = parents;
        nested.push_back(key);
        flatten(nested, value, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& entry : value) item.inputs.push_back(scalar(entry));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
  }
};

// Flag bundle shared by run and sweep.
struct RunFlags {
  std::string strategy = "asi";
  std::string dataset;
  std::string skills_dir;
  std::string backend;
  std::string endpoint;
  std::string model;
  std::string script;
  std::string keyword = "Skill";
  std::string skill_mode = "lenient";
  double vram_gb = -1.0;  // <0: fall back to the built-in per-model table
  std::uint64_t seed = 0;
  std::size_t n_distractors = 5;
  std::size_t parallelism = 1;
  std::size_t context_limit = 10240;
  double timeout_s = 120.0;
};

void add_run_flags(CLI::App& cmd, RunFlags& f, bool strategy_matters) {
  if (strategy_matters) {
    cmd.add_option("--strategy", f.strategy, "di | fsi | asi | asih")->required();
  }
  cmd.add_option("--dataset", f.dataset, "task JSONL file")->required();
  cmd.add_option("--skills-dir", f.skills_dir, "directory of <name>/SKILL.md")->required();
  cmd.add_option("--backend", f.backend, "http | mock | heuristic")->required();
  cmd.add_option("--endpoint", f.endpoint, "chat-completions base URL (http backend)");
  cmd.add_option("--model", f.model, "model identifier sent to the backend");
  cmd.add_option("--script", f.script, "scripted replies for the mock backend (JSON)");
  cmd.add_option("--keyword", f.keyword, "synonym substituted for 'skill' in prompts");
  cmd.add_option("--skill-mode", f.skill_mode, "lenient | strict routing accuracy");
  cmd.add_option("--vram-gb", f.vram_gb, "GPU memory per trial for cost accounting");
  cmd.add_option("--seed", f.seed, "experiment seed");
  cmd.add_option("--n-distractors", f.n_distractors, "distractors per trial hub");
  cmd.add_option("--parallelism", f.parallelism, "max concurrent trials");
  cmd.add_option("--context-limit", f.context_limit, "prompt token budget");
  cmd.add_option("--timeout", f.timeout_s, "request timeout in seconds");
}

skillbench::ExperimentSpec spec_from_flags(const RunFlags& f) {
  skillbench::ExperimentSpec spec;
  spec.strategy = skillbench::strategy_from_name(f.strategy);
  spec.dataset_path = f.dataset;
  spec.skills_dir = f.skills_dir;
  spec.seed = f.seed;
  spec.n_distractors = f.n_distractors;
  spec.keyword = {f.keyword};
  spec.skill_mode = skillbench::skill_mode_from_name(f.skill_mode);
  spec.parallelism = f.parallelism;

  spec.backend.kind = skillbench::backend_kind_from_name(f.backend);
  spec.backend.endpoint = f.endpoint;
  spec.backend.model_id = f.model;
  spec.backend.context_limit_tokens = f.context_limit;
  spec.backend.request_timeout_s = f.timeout_s;
  if (f.vram_gb >= 0.0) {
    spec.backend.vram_gb = f.vram_gb;
  } else if (auto v = skillbench::default_vram_gb(f.model)) {
    spec.backend.vram_gb = *v;
  }

  if (!f.script.empty()) spec.script = skillbench::load_script(f.script);
  return spec;
}

int cmd_validate(const std::string& skills_dir) {
  std::vector<skillbench::SkillFileReport> reports;
  try {
    reports = skillbench::scan_hub_dir(skills_dir);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::IoError ? 2 : 1;
  }

  bool all_ok = true;
  for (const auto& r : reports) {
    if (r.skill) {
      std::cout << "OK " << r.skill->name() << '\n';
    } else {
      std::cout << "ERR " << r.path << ": " << r.error << '\n';
      all_ok = false;
    }
  }
  for (const auto& r : reports) {
    if (!r.skill) continue;
    for (const std::string& ref : r.skill->references) {
      std::cout << "REF " << r.skill->name() << " -> " << ref << '\n';
    }
  }
  return all_ok ? 0 : 1;
}

int cmd_run(const RunFlags& flags, const std::string& out_dir) {
  const skillbench::ExperimentSpec spec = spec_from_flags(flags);

  skillbench::RunSinks sinks;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path base(out_dir);
    sinks.records_path = (base / "records.jsonl").string();
    sinks.transcripts_path = (base / "transcripts.jsonl").string();
  }

  const skillbench::ExperimentResult result = skillbench::run_experiment(spec, sinks);
  const std::string table = skillbench::aggregate_to_csv(result.aggregate);
  if (!out_dir.empty()) {
    const std::filesystem::path csv = std::filesystem::path(out_dir) / "aggregate.csv";
    std::ofstream out(csv);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + csv.string());
    out << table;
  }
  std::cout << table;
  return 0;
}

int cmd_sweep(const RunFlags& flags, const std::vector<std::size_t>& counts,
              const std::string& out_file) {
  const skillbench::ExperimentSpec spec = spec_from_flags(flags);
  const std::vector<skillbench::Task> tasks = skillbench::load_dataset(spec.dataset_path);
  const std::vector<skillbench::SweepPoint> points =
      skillbench::sweep_skill_count(spec, counts, tasks);

  std::ostringstream csv;
  csv << "N,skill_acc\n";
  for (const auto& p : points) csv << p.n << ',' << compact_double(p.skill_acc) << '\n';

  if (!out_file.empty()) {
    std::ofstream out(out_file);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + out_file);
    out << csv.str();
  }
  std::cout << csv.str();
  return 0;
}

int cmd_fit(const std::string& points_file) {
  std::ifstream in(points_file);
  if (!in) throw Error(ErrorCode::IoError, "cannot open points file: " + points_file);

  std::vector<std::pair<double, double>> points;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string::npos) {
      throw Error(ErrorCode::ParseFailure, "expected 'N,acc' lines in " + points_file);
    }
    try {
      points.emplace_back(std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
    } catch (const std::exception&) {
      if (points.empty()) continue;  // header row
      throw Error(ErrorCode::ParseFailure, "bad point line: " + line);
    }
  }

  std::cout << skillbench::decay_fit_to_json(skillbench::fit_decay_curve(points)) << '\n';
  return 0;
}

// Every belief with grid-multiple coordinates: resolution r yields points
// whose entries are k/r summing to 1.
void enumerate_beliefs(Eigen::Index states, std::size_t resolution,
                       const std::function<void(const Eigen::VectorXd&)>& visit) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(states);
  std::vector<std::size_t> parts(states, 0);
  const std::function<void(Eigen::Index, std::size_t)> rec = [&](Eigen::Index i,
                                                                 std::size_t left) {
    if (i == states - 1) {
      parts[i] = left;
      for (Eigen::Index s = 0; s < states; ++s) {
        b(s) = static_cast<double>(parts[s]) / static_cast<double>(resolution);
      }
      visit(b);
      return;
    }
    for (std::size_t k = 0; k <= left; ++k) {
      parts[i] = k;
      rec(i + 1, left - k);
    }
  };
  rec(0, resolution);
}

int cmd_pomdp(const std::string& model_file, int horizon_override, std::size_t grid) {
  skillbench::pomdp::PomdpModel model = skillbench::pomdp::load_model(model_file);
  if (horizon_override >= 0) model.horizon = horizon_override;
  if (grid == 0) grid = model.num_states == 2 ? 100 : 20;

  const skillbench::pomdp::ValueFunction vf = skillbench::pomdp::value_iteration(model);
  const int h = model.horizon;

  for (Eigen::Index s = 0; s < model.num_states; ++s) std::cout << 'b' << s << ',';
  std::cout << "value,action\n";
  enumerate_beliefs(model.num_states, grid, [&](const Eigen::VectorXd& probs) {
    const skillbench::pomdp::BeliefState b{probs};
    const skillbench::pomdp::AlphaVector& best = vf.best(h, b);
    for (Eigen::Index s = 0; s < model.num_states; ++s) {
      std::cout << compact_double(probs(s)) << ',';
    }
    std::cout << compact_double(best.values.dot(probs)) << ','
              << model.actions[best.action].name << '\n';
  });
  return 0;
}

int cmd_report(const std::vector<std::string>& files, const std::string& group_by,
               const std::string& skill_mode) {
  const skillbench::SkillMode mode = skillbench::skill_mode_from_name(skill_mode);

  std::map<std::string, std::vector<skillbench::TrialRecord>> groups;
  for (const std::string& path : files) {
    std::vector<skillbench::TrialRecord> records = skillbench::load_records(path);
    if (records.empty()) throw Error(ErrorCode::EmptyInput, "no records in " + path);
    for (skillbench::TrialRecord& r : records) {
      const std::string key =
          group_by == "file" ? path : std::string(skillbench::strategy_name(r.strategy));
      groups[key].push_back(std::move(r));
    }
  }

  std::cout << "group,cls_acc,cls_f1,skill_acc,avg_gt_min,avg_vram_time,n\n";
  std::cout << std::fixed << std::setprecision(3);
  for (const auto& [key, records] : groups) {
    const skillbench::Aggregate agg = skillbench::aggregate(records, mode);
    std::cout << key << ',' << agg.cls_acc << ',' << agg.cls_f1 << ',';
    if (agg.skill_acc) {
      std::cout << *agg.skill_acc;
    } else {
      std::cout << '-';
    }
    std::cout << ',' << agg.avg_gt_min << ',' << agg.avg_vram_time << ',' << agg.n << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Skill-routing benchmark runner"};
  app.require_subcommand(1);
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file supplying flag defaults");

  std::string skills_dir;
  CLI::App* validate = app.add_subcommand("validate", "check every SKILL.md in a directory");
  validate->add_option("--skills-dir", skills_dir, "directory of <name>/SKILL.md")->required();

  RunFlags run_flags;
  std::string out_dir;
  CLI::App* run = app.add_subcommand("run", "run one experiment and aggregate it");
  add_run_flags(*run, run_flags, true);
  run->add_option("--out", out_dir, "directory for records.jsonl / aggregate.csv");

  RunFlags sweep_flags;
  std::vector<std::size_t> counts;
  std::string sweep_out;
  CLI::App* sweep = app.add_subcommand("sweep", "routing accuracy across hub sizes");
  add_run_flags(*sweep, sweep_flags, false);
  sweep->add_option("--counts", counts, "hub sizes, e.g. 5,10,20,50,100")
      ->required()
      ->delimiter(',');
  sweep->add_option("--out", sweep_out, "also write the CSV here");

  std::string points_file;
  CLI::App* fit = app.add_subcommand("fit", "fit a decay curve to sweep output");
  fit->add_option("--points", points_file, "CSV of N,skill_acc")->required();

  std::string model_file;
  int horizon_override = -1;
  std::size_t grid = 0;
  CLI::App* pomdp = app.add_subcommand("pomdp", "evaluate a disclosure policy on a belief grid");
  pomdp->add_option("--model", model_file, "model JSON file")->required();
  pomdp->add_option("--horizon", horizon_override, "override the model's horizon");
  pomdp->add_option("--grid", grid, "belief grid resolution");

  std::vector<std::string> report_files;
  std::string group_by = "strategy";
  std::string report_mode = "lenient";
  CLI::App* report = app.add_subcommand("report", "aggregate records files into a table");
  report->add_option("files", report_files, "records JSONL files")->required();
  report->add_option("--group-by", group_by, "strategy | file")
      ->check(CLI::IsMember({"strategy", "file"}));
  report->add_option("--skill-mode", report_mode, "lenient | strict");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (validate->parsed()) return cmd_validate(skills_dir);
    if (run->parsed()) return cmd_run(run_flags, out_dir);
    if (sweep->parsed()) return cmd_sweep(sweep_flags, counts, sweep_out);
    if (fit->parsed()) return cmd_fit(points_file);
    if (pomdp->parsed()) return cmd_pomdp(model_file, horizon_override, grid);
    if (report->parsed()) return cmd_report(report_files, group_by, report_mode);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
