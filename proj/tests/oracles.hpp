#pragma once

// Reference implementations used to cross-check the library. Everything here
// is written from the definitions with plain loops and containers — no Eigen,
// no shared code paths with src/ — so an agreement test means two independent
// derivations landed on the same numbers.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace oracles {

// ---- finite-horizon decision tree ------------------------------------------

struct PlainAction {
  bool reveal = false;
  std::vector<std::vector<double>> transition;   // [s][s']
  std::vector<std::vector<double>> observation;  // [s'][o]
  std::vector<double> reward;                    // [s]
};

struct PlainModel {
  int states = 0;
  int observations = 0;
  double reveal_cost = 0.0;
  std::vector<PlainAction> actions;
};

inline double best_execute_value(const PlainModel& m, const std::vector<double>& belief) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& a : m.actions) {
    if (a.reveal) continue;
    double v = 0.0;
    for (int s = 0; s < m.states; ++s) v += belief[s] * a.reward[s];
    best = std::max(best, v);
  }
  return best;
}

// P(o, s' | b, a) by explicit joint enumeration; returns the normalized
// posterior and the evidence mass.
inline std::pair<std::vector<double>, double> posterior_by_enumeration(
    const PlainAction& a, const std::vector<double>& belief, int obs) {
  const int states = static_cast<int>(belief.size());
  std::vector<double> joint(states, 0.0);
  double evidence = 0.0;
  for (int next = 0; next < states; ++next) {
    for (int prev = 0; prev < states; ++prev) {
      joint[next] += belief[prev] * a.transition[prev][next] * a.observation[next][obs];
    }
    evidence += joint[next];
  }
  if (evidence > 0.0) {
    for (double& p : joint) p /= evidence;
  }
  return {joint, evidence};
}

// Exhaustive expectimax over the action/observation tree: executing ends the
// episode, revealing pays the cost and recurses one step shallower.
inline double expectimax_value(const PlainModel& m, const std::vector<double>& belief,
                               int horizon) {
  double best = best_execute_value(m, belief);
  if (horizon <= 0) return best;
  for (const auto& a : m.actions) {
    if (!a.reveal) continue;
    double total = -m.reveal_cost;
    for (int o = 0; o < m.observations; ++o) {
      auto [posterior, evidence] = posterior_by_enumeration(a, belief, o);
      if (evidence <= 0.0) continue;
      total += evidence * expectimax_value(m, posterior, horizon - 1);
    }
    best = std::max(best, total);
  }
  return best;
}

// ---- keyword-overlap routing --------------------------------------------------

inline std::vector<std::string> split_tokens(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!current.empty()) {
      tokens.push_back(current);
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(current);
  return tokens;
}

inline double jaccard_overlap(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::vector<std::string> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  return static_cast<double>(common.size()) /
         static_cast<double>(a.size() + b.size() - common.size());
}

// Routing contract: score each skill by Jaccard overlap between the task
// tokens and the tokens of "<name> <description>"; pick the best strictly
// positive score, breaking ties toward the lexicographically smallest name.
inline std::optional<std::string> route_by_overlap(
    const std::string& task, const std::vector<std::pair<std::string, std::string>>& skills) {
  auto task_list = split_tokens(task);
  std::set<std::string> task_tokens(task_list.begin(), task_list.end());

  std::vector<std::pair<std::string, std::string>> sorted = skills;
  std::sort(sorted.begin(), sorted.end());

  double best_score = 0.0;
  std::optional<std::string> best_name;
  for (const auto& [name, description] : sorted) {
    auto tokens = split_tokens(name + " " + description);
    std::set<std::string> skill_tokens(tokens.begin(), tokens.end());
    const double score = jaccard_overlap(task_tokens, skill_tokens);
    if (score > best_score) {
      best_score = score;
      best_name = name;
    }
  }
  return best_name;
}

// ---- deterministic noise -------------------------------------------------------

// Box-Muller on explicit mt19937_64 draws. std::normal_distribution's output
// sequence is implementation-defined; this is bit-stable everywhere.
inline double standard_gaussian(std::mt19937_64& gen) {
  const double u1 = (static_cast<double>(gen() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
  const double u2 = static_cast<double>(gen() >> 11) * 0x1.0p-53;         // [0, 1)
  constexpr double kTwoPi = 6.283185307179586;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

}  // namespace oracles
