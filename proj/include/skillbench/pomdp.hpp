#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "skillbench/error.hpp"

// Finite-horizon controller for progressive disclosure: latent task state,
// paid reveal actions that sharpen the belief, and terminal execute actions
// whose payoff depends on the true state. Exact alpha-vector value iteration
// with pointwise-dominance pruning.

namespace skillbench::pomdp {

inline constexpr double kStochasticTolerance = 1e-12;
inline constexpr std::size_t kMaxGeneratedVectors = 1'000'000;

enum class ActionKind { Reveal, Execute };

struct ActionSpec {
  std::string name;
  ActionKind kind = ActionKind::Execute;
  // Reveal actions: transition is SxS (row s -> distribution over s'),
  // observation is SxO (row s' -> distribution over o).
  Eigen::MatrixXd transition;
  Eigen::MatrixXd observation;
  // Execute actions: expected payoff per true state, length S.
  Eigen::VectorXd reward;
};

struct PomdpModel {
  Eigen::Index num_states = 0;
  Eigen::Index num_observations = 0;
  std::vector<ActionSpec> actions;
  double reveal_cost = 0.0;  // charged once per reveal action taken
  int horizon = 0;

  std::vector<int> reveal_actions() const;
  std::vector<int> execute_actions() const;

  // Checks stochasticity (rows sum to 1 within 1e-12, entries >= 0), shape
  // agreement, reveal_cost >= 0, horizon >= 0, and at least one execute
  // action. Throws Error{InvalidModel}.
  void validate() const;
};

struct BeliefState {
  Eigen::VectorXd probs;

  static BeliefState uniform(Eigen::Index n) {
    return {Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n))};
  }
};

// Linear value certificate: value at belief b is values.dot(b); action is the
// root action this certificate commits to.
struct AlphaVector {
  Eigen::VectorXd values;
  int action = 0;
};

// P(o | b, a) for a reveal action.
double observation_probability(const PomdpModel& m, const BeliefState& b, int action,
                               int observation);

// Bayes filter: posterior over next state given action and observation.
// Throws Error{ImpossibleObservation} when P(o | b, a) = 0.
BeliefState update_belief(const PomdpModel& m, const BeliefState& b, int action, int observation);

struct ExecuteValue {
  double value = 0.0;
  int action = 0;
};

// Best terminal payoff under the current belief; ties to the lowest index.
ExecuteValue value_execute_now(const PomdpModel& m, const BeliefState& b);

// One-step lookahead gain of a reveal action, net of its cost:
// sum_o P(o|b,a) * V_exec(posterior) - V_exec(b) - c.
double value_of_information(const PomdpModel& m, const BeliefState& b, int reveal_action);

// Best-VOI reveal action if its VOI is positive, else the best execute
// action. Reveal ties to the lowest index.
int decide(const PomdpModel& m, const BeliefState& b);

class ValueFunction {
 public:
  explicit ValueFunction(std::vector<std::vector<AlphaVector>> stages)
      : stages_(std::move(stages)) {}

  int horizon() const { return static_cast<int>(stages_.size()) - 1; }
  const std::vector<AlphaVector>& stage(int h) const { return stages_.at(h); }

  double evaluate(int h, const BeliefState& b) const;
  const AlphaVector& best(int h, const BeliefState& b) const;

 private:
  std::vector<std::vector<AlphaVector>> stages_;
};

// Exact backup for h = 0..m.horizon. Stage 0 holds the execute payoffs;
// later stages add reveal cross-sums, pruned by pointwise dominance. Throws
// Error{StateSpaceTooLarge} past the generated-vector guard.
ValueFunction value_iteration(const PomdpModel& m);

// The bundled 2-state toy: one reveal with identity dynamics and a symmetric
// binary signal of the given accuracy, plus one identity-payoff execute
// action per state.
PomdpModel symmetric_toy(double accuracy, double reveal_cost, int horizon = 3);

PomdpModel parse_model_json(const std::string& json_text);
PomdpModel load_model(const std::string& path);

}  // namespace skillbench::pomdp
