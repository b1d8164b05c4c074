#include "skillbench/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "skillbench/hash.hpp"

namespace skillbench {

// ---- datasets ---------------------------------------------------------------

std::vector<Task> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open dataset: " + path);
  std::vector<Task> tasks;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw Error(ErrorCode::ParseFailure,
                  path + ":" + std::to_string(lineno) + ": not a JSON object");
    }
    Task t;
    try {
      t.id = j.at("id").get<std::string>();
      t.input_text = j.at("input").get<std::string>();
      t.gold_label = j.at("label").get<std::string>();
      t.gold_skill = j.at("skill").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseFailure,
                  path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (t.id.empty() || t.input_text.empty() || t.gold_label.empty() || t.gold_skill.empty()) {
      throw Error(ErrorCode::SchemaViolation,
                  path + ":" + std::to_string(lineno) + ": all task fields must be non-empty");
    }
    tasks.push_back(std::move(t));
  }
  if (tasks.empty()) throw Error(ErrorCode::EmptyDataset, "dataset has no tasks: " + path);
  return tasks;
}

void save_dataset(const std::string& path, const std::vector<Task>& tasks) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write dataset: " + path);
  for (const Task& t : tasks) {
    nlohmann::ordered_json j;
    j["id"] = t.id;
    j["input"] = t.input_text;
    j["label"] = t.gold_label;
    j["skill"] = t.gold_skill;
    out << j.dump() << '\n';
  }
}

// ---- trials -----------------------------------------------------------------

std::uint64_t trial_seed(std::uint64_t experiment_seed, const std::string& task_id) {
  return experiment_seed ^ fnv1a64(task_id);
}

std::string trace_to_json_line(const TrialTrace& trace) {
  nlohmann::ordered_json j;
  j["id"] = trace.task_id;
  j["strategy"] = strategy_name(trace.strategy);
  nlohmann::ordered_json phases = nlohmann::ordered_json::array();
  for (const PhaseTrace& p : trace.phases) {
    nlohmann::ordered_json jp;
    jp["phase"] = p.phase;
    nlohmann::ordered_json msgs = nlohmann::ordered_json::array();
    for (const ChatMessage& m : p.prompt.messages) {
      msgs.push_back({{"role", role_name(m.role)}, {"content", m.content}});
    }
    jp["messages"] = std::move(msgs);
    jp["response"] = p.response;
    phases.push_back(std::move(jp));
  }
  j["phases"] = std::move(phases);
  return j.dump();
}

namespace {

SkillHub trial_hub_for(const SkillHub& full_hub, const Task& task, std::size_t n_distractors,
                       std::uint64_t seed) {
  auto it = full_hub.skills.find(task.gold_skill);
  if (it == full_hub.skills.end()) {
    throw Error(ErrorCode::ConfigError,
                "task '" + task.id + "' names a skill not in the hub: " + task.gold_skill);
  }
  std::vector<Skill> pool;
  pool.reserve(full_hub.size());
  for (const auto& [name, skill] : full_hub.skills) {
    if (name != task.gold_skill) pool.push_back(skill);
  }
  return build_trial_hub(it->second, pool, n_distractors, seed);
}

}  // namespace

TrialOutcome run_trial(const ExperimentSpec& spec, const Task& task, const SkillHub& full_hub,
                       Backend& backend) {
  const SkillHub hub =
      trial_hub_for(full_hub, task, spec.n_distractors, trial_seed(spec.seed, task.id));

  TrialOutcome out;
  out.record.id = task.id;
  out.record.strategy = spec.strategy;
  out.record.gold_label = task.gold_label;
  out.record.vram_gb = spec.backend.vram_gb;
  out.trace.task_id = task.id;
  out.trace.strategy = spec.strategy;

  double total_latency_s = 0.0;
  auto complete_phase = [&](const char* phase, const Transcript& prompt) {
    CompletionResult r = backend.complete(prompt);
    total_latency_s += r.latency_s;
    out.trace.phases.push_back({phase, prompt, r.text});
    return r.text;
  };

  try {
    if (spec.strategy == Strategy::DI || spec.strategy == Strategy::FSI) {
      const Transcript prompt =
          render_strategy_prompt(spec.strategy, hub, task.input_text, spec.keyword);
      const ExecutionResponse resp = parse_execution_json(complete_phase("execution", prompt));
      out.record.predicted_label = resp.message;
      out.record.degraded = resp.degraded;
    } else {
      out.record.gold_skill = task.gold_skill;
      const Transcript selection_prompt =
          render_selection_prompt(hub, task.input_text, spec.keyword);
      const std::string selection_raw = complete_phase("selection", selection_prompt);
      const SelectionResponse selection = parse_selection_json(selection_raw);
      out.record.selected_skills = selection.skills;

      // Hallucinated names are flagged and dropped, never fatal.
      std::vector<Skill> chosen;
      for (const std::string& name : selection.skills) {
        auto it = hub.skills.find(name);
        if (it == hub.skills.end()) {
          out.record.routing_violation = true;
        } else {
          chosen.push_back(it->second);
        }
      }

      if (!chosen.empty()) {
        Transcript execution_prompt =
            render_execution_prompt(chosen, task.input_text, spec.keyword);
        if (spec.strategy == Strategy::ASIH) {
          // Carry the selection exchange into phase 2, then trim.
          Transcript with_history;
          with_history.add(execution_prompt.messages.front());
          with_history.add(ChatMessage::user(task.input_text));
          with_history.add(ChatMessage::assistant(selection_raw));
          with_history.add(ChatMessage::user(task.input_text));
          execution_prompt = trim_history(with_history);
        }
        const ExecutionResponse resp =
            parse_execution_json(complete_phase("execution", execution_prompt));
        out.record.predicted_label = resp.message;
        out.record.degraded = resp.degraded;
      }
    }
  } catch (const Error&) {
    // A failed completion or unparseable reply is a data point: the record
    // keeps whatever phases finished and an absent prediction.
  }

  out.record.gt_minutes = total_latency_s / 60.0;
  return out;
}

// ---- experiments ------------------------------------------------------------

ExperimentResult run_experiment(const ExperimentSpec& spec, const RunSinks& sinks) {
  return run_experiment(spec, load_dataset(spec.dataset_path), sinks);
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const std::vector<Task>& tasks,
                                const RunSinks& sinks) {
  if (tasks.empty()) throw Error(ErrorCode::EmptyDataset, "experiment has no tasks");
  if (spec.parallelism < 1) throw Error(ErrorCode::ConfigError, "parallelism must be >= 1");

  const SkillHub full_hub = load_hub(spec.skills_dir);
  const std::unique_ptr<Backend> backend = make_backend(spec.backend, spec.script);

  std::ofstream records_out, traces_out;
  if (sinks.records_path) {
    records_out.open(*sinks.records_path, std::ios::trunc);
    if (!records_out) {
      throw Error(ErrorCode::IoError, "cannot write records file: " + *sinks.records_path);
    }
  }
  if (sinks.transcripts_path) {
    traces_out.open(*sinks.transcripts_path, std::ios::trunc);
    if (!traces_out) {
      throw Error(ErrorCode::IoError, "cannot write transcript file: " + *sinks.transcripts_path);
    }
  }

  std::vector<TrialOutcome> outcomes(tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex sink_mutex;
  std::exception_ptr failure;

  auto worker = [&] {
    try {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= tasks.size()) return;
        TrialOutcome out = run_trial(spec, tasks[i], full_hub, *backend);
        {
          std::lock_guard<std::mutex> lock(sink_mutex);
          if (records_out.is_open()) records_out << record_to_json_line(out.record) << '\n';
          if (traces_out.is_open()) traces_out << trace_to_json_line(out.trace) << '\n';
        }
        outcomes[i] = std::move(out);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(sink_mutex);
      if (!failure) failure = std::current_exception();
    }
  };

  const std::size_t n_threads = std::min(spec.parallelism, tasks.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  ExperimentResult result;
  result.records.reserve(outcomes.size());
  for (TrialOutcome& out : outcomes) result.records.push_back(std::move(out.record));
  result.aggregate = aggregate(result.records, spec.skill_mode);
  return result;
}

// ---- hub-size sweep ----------------------------------------------------------

std::vector<SweepPoint> sweep_skill_count(const ExperimentSpec& spec,
                                          const std::vector<std::size_t>& counts,
                                          const std::vector<Task>& tasks) {
  if (counts.empty()) throw Error(ErrorCode::EmptyInput, "no hub sizes to sweep");
  if (tasks.empty()) throw Error(ErrorCode::EmptyDataset, "sweep has no tasks");

  const SkillHub full_hub = load_hub(spec.skills_dir);
  const auto [min_it, max_it] = std::minmax_element(counts.begin(), counts.end());
  if (*min_it < 1) throw Error(ErrorCode::ConfigError, "hub sizes must be >= 1");
  const std::size_t max_count = *max_it;
  if (full_hub.size() < max_count) {
    throw Error(ErrorCode::InsufficientPool,
                "hub holds " + std::to_string(full_hub.size()) + " skills, sweep needs " +
                    std::to_string(max_count));
  }

  const std::unique_ptr<Backend> backend = make_backend(spec.backend, spec.script);

  std::vector<SweepPoint> points;
  points.reserve(counts.size());
  for (std::size_t count : counts) {
    std::vector<TrialRecord> records;
    records.reserve(tasks.size());
    for (const Task& task : tasks) {
      const SkillHub hub =
          trial_hub_for(full_hub, task, count - 1, trial_seed(spec.seed, task.id));
      TrialRecord r;
      r.id = task.id;
      r.strategy = spec.strategy;
      r.gold_label = task.gold_label;
      r.gold_skill = task.gold_skill;
      r.vram_gb = spec.backend.vram_gb;
      try {
        const Transcript prompt = render_selection_prompt(hub, task.input_text, spec.keyword);
        const CompletionResult c = backend->complete(prompt);
        r.gt_minutes = c.latency_s / 60.0;
        r.selected_skills = parse_selection_json(c.text).skills;
      } catch (const Error&) {
        // selection failure counts as a routing miss
      }
      records.push_back(std::move(r));
    }
    points.push_back({count, skill_accuracy(records, spec.skill_mode)});
  }
  return points;
}

// ---- decay fit ----------------------------------------------------------------

double DecayFit::operator()(double n) const {
  return c + (a - c) * std::exp(-lambda * (n - n0));
}

namespace {

struct InnerFit {
  double a = 0.0;
  double c = 0.0;
  double rss = std::numeric_limits<double>::infinity();
};

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

// Best (a, c) in the box 0 <= c <= a <= 1 for fixed decay weights
// u_i = exp(-lambda * x_i): the model is linear, y ~ a*u + c*(1-u), so the
// optimum is either the unconstrained solution or sits on a box face. All
// candidates are closed-form; evaluate and keep the cheapest.
InnerFit solve_levels(const std::vector<double>& u, const std::vector<double>& y) {
  const std::size_t n = u.size();
  double suu = 0.0, svv = 0.0, suv = 0.0, suy = 0.0, svy = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = 1.0 - u[i];
    suu += u[i] * u[i];
    svv += v * v;
    suv += u[i] * v;
    suy += u[i] * y[i];
    svy += v * y[i];
    sy += y[i];
  }

  std::vector<std::pair<double, double>> candidates;  // (a, c)
  const double det = suu * svv - suv * suv;
  if (std::abs(det) > 1e-14) {
    const double a = (suy * svv - svy * suv) / det;
    const double c = (svy * suu - suy * suv) / det;
    if (a >= 0.0 && a <= 1.0 && c >= 0.0 && c <= a) candidates.emplace_back(a, c);
  }
  if (suu > 0.0) candidates.emplace_back(clamp01(suy / suu), 0.0);  // face c = 0
  if (svv > 0.0) {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) c += (y[i] - u[i]) * (1.0 - u[i]);
    candidates.emplace_back(1.0, clamp01(c / svv));  // face a = 1
  }
  const double mean = clamp01(sy / static_cast<double>(n));
  candidates.emplace_back(mean, mean);  // face a = c (constant)
  candidates.emplace_back(0.0, 0.0);
  candidates.emplace_back(1.0, 0.0);
  candidates.emplace_back(1.0, 1.0);

  InnerFit best;
  for (const auto& [a, c] : candidates) {
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - (c + (a - c) * u[i]);
      rss += r * r;
    }
    if (rss < best.rss) best = {a, c, rss};
  }
  return best;
}

InnerFit solve_at_lambda(double lambda, const std::vector<double>& x,
                         const std::vector<double>& y) {
  std::vector<double> u(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) u[i] = std::exp(-lambda * x[i]);
  return solve_levels(u, y);
}

}  // namespace

DecayFit fit_decay_curve(const std::vector<std::pair<double, double>>& points) {
  std::set<double> distinct;
  for (const auto& [n, acc] : points) distinct.insert(n);
  if (distinct.size() < 3) {
    throw Error(ErrorCode::DegenerateInput, "decay fit needs at least 3 distinct hub sizes");
  }

  const double n0 = *distinct.begin();
  std::vector<double> x, y;
  x.reserve(points.size());
  y.reserve(points.size());
  for (const auto& [n, acc] : points) {
    x.push_back(n - n0);
    y.push_back(acc);
  }

  // Coarse log-spaced grid over the decay rate (lambda = 0 first so constant
  // data settles there), then ternary refinement between the best point's
  // neighbors.
  constexpr int kGridPoints = 240;
  constexpr double kLambdaMin = 1e-4;
  constexpr double kLambdaMax = 10.0;
  std::vector<double> grid{0.0};
  for (int k = 0; k < kGridPoints; ++k) {
    const double t = static_cast<double>(k) / (kGridPoints - 1);
    grid.push_back(kLambdaMin * std::pow(kLambdaMax / kLambdaMin, t));
  }

  double best_lambda = 0.0;
  InnerFit best = solve_at_lambda(0.0, x, y);
  std::size_t best_idx = 0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const InnerFit fit = solve_at_lambda(grid[i], x, y);
    if (fit.rss < best.rss) {
      best = fit;
      best_lambda = grid[i];
      best_idx = i;
    }
  }

  double lo = best_idx > 0 ? grid[best_idx - 1] : 0.0;
  double hi = best_idx + 1 < grid.size() ? grid[best_idx + 1] : grid.back();
  for (int iter = 0; iter < 200; ++iter) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (solve_at_lambda(m1, x, y).rss <= solve_at_lambda(m2, x, y).rss) {
      hi = m2;
    } else {
      lo = m1;
    }
  }
  const double refined = 0.5 * (lo + hi);
  const InnerFit refined_fit = solve_at_lambda(refined, x, y);
  if (refined_fit.rss < best.rss) {
    best = refined_fit;
    best_lambda = refined;
  }

  // Constant fit is always admissible; never report anything worse.
  const InnerFit constant = solve_at_lambda(0.0, x, y);
  if (constant.rss <= best.rss) {
    best = constant;
    best_lambda = 0.0;
  }

  DecayFit fit;
  fit.a = best.a;
  fit.c = best.c;
  fit.lambda = best_lambda;
  fit.n0 = n0;
  fit.rss = best.rss;
  return fit;
}

std::string decay_fit_to_json(const DecayFit& fit) {
  nlohmann::ordered_json j;
  j["a"] = fit.a;
  j["c"] = fit.c;
  j["lambda"] = fit.lambda;
  j["n0"] = fit.n0;
  j["rss"] = fit.rss;
  return j.dump();
}

// ---- ablations ----------------------------------------------------------------

std::vector<std::pair<KeywordVariant, Aggregate>> synonym_sweep(
    const ExperimentSpec& spec, const std::vector<KeywordVariant>& keywords) {
  if (keywords.empty()) throw Error(ErrorCode::EmptyInput, "no keywords to sweep");
  const std::vector<Task> tasks = load_dataset(spec.dataset_path);
  std::vector<std::pair<KeywordVariant, Aggregate>> out;
  out.reserve(keywords.size());
  for (const KeywordVariant& keyword : keywords) {
    ExperimentSpec variant = spec;
    variant.keyword = keyword;
    out.emplace_back(keyword, run_experiment(variant, tasks).aggregate);
  }
  return out;
}

// ---- synthetic data -------------------------------------------------------------

namespace {

// Fixed framing so only the embedded description words vary per task.
const std::vector<std::string>& task_prefixes() {
  static const std::vector<std::string> p = {
      "Please handle this request about", "We need help with a case involving",
      "A customer wrote in about", "Review the following item concerning",
  };
  return p;
}

const std::vector<std::string>& task_suffixes() {
  static const std::vector<std::string> s = {
      "and reply with your verdict.", "then classify the outcome.",
      "and report the result.", "before the end of the day.",
  };
  return s;
}

std::vector<std::string> content_words(const std::string& text) {
  std::vector<std::string> words;
  for (std::string& w : tokenize_words(text)) {
    if (w.size() >= 3) words.push_back(std::move(w));
  }
  return words;
}

}  // namespace

std::vector<Task> generate_synthetic_tasks(const SkillHub& hub, std::size_t n_tasks,
                                           std::uint64_t seed) {
  if (hub.empty()) throw Error(ErrorCode::EmptyHub, "cannot generate tasks from an empty hub");
  if (n_tasks < 1) throw Error(ErrorCode::EmptyInput, "n_tasks must be >= 1");

  std::vector<const Skill*> skills;
  skills.reserve(hub.size());
  for (const auto& [name, skill] : hub.skills) skills.push_back(&skill);

  static const char* kLabels[2] = {"positive", "negative"};
  std::mt19937_64 gen(seed);

  std::vector<Task> tasks;
  tasks.reserve(n_tasks);
  for (std::size_t i = 0; i < n_tasks; ++i) {
    const Skill& gold = *skills[gen() % skills.size()];
    Task t;
    t.id = "task-" + std::to_string(i + 1);
    t.gold_label = kLabels[gen() % 2];
    t.gold_skill = gold.name();

    std::vector<std::string> words = content_words(gold.descriptor.description);
    if (words.empty()) words = tokenize_words(gold.name());
    std::size_t k = 3 + gen() % 4;
    k = std::min(k, words.size());
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t pick = j + static_cast<std::size_t>(gen() % (words.size() - j));
      std::swap(words[j], words[pick]);
    }

    std::string body;
    for (std::size_t j = 0; j < k; ++j) {
      if (!body.empty()) body.push_back(' ');
      body += words[j];
    }
    const std::string& prefix = task_prefixes()[gen() % task_prefixes().size()];
    const std::string& suffix = task_suffixes()[gen() % task_suffixes().size()];
    t.input_text = prefix + " " + body + " " + suffix;
    tasks.push_back(std::move(t));
  }
  return tasks;
}

}  // namespace skillbench
