#include "skillbench/pomdp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace skillbench::pomdp {

namespace {

bool row_stochastic(const Eigen::MatrixXd& m) {
  if (m.minCoeff() < 0.0) return false;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    if (std::abs(m.row(r).sum() - 1.0) > kStochasticTolerance) return false;
  }
  return true;
}

const ActionSpec& reveal_spec(const PomdpModel& m, int action) {
  if (action < 0 || action >= static_cast<int>(m.actions.size())) {
    throw Error(ErrorCode::InvalidModel, "action index out of range");
  }
  const ActionSpec& spec = m.actions[action];
  if (spec.kind != ActionKind::Reveal) {
    throw Error(ErrorCode::InvalidModel, "action '" + spec.name + "' is not a reveal action");
  }
  return spec;
}

// Backprojection of a next-stage certificate through (reveal action, obs):
// g(s) = sum_{s'} T(s,s') * Omega(s',o) * alpha(s').
Eigen::VectorXd backproject(const ActionSpec& a, int o, const Eigen::VectorXd& alpha) {
  return a.transition * a.observation.col(o).cwiseProduct(alpha);
}

// Drops every vector that another one weakly dominates pointwise; exact
// duplicates keep their first occurrence so output order is deterministic.
std::vector<AlphaVector> prune_dominated(std::vector<AlphaVector> set) {
  // Two passes: decide first, move afterwards, so the comparisons never see a
  // moved-from vector.
  std::vector<bool> dominated(set.size(), false);
  for (std::size_t i = 0; i < set.size(); ++i) {
    for (std::size_t j = 0; j < set.size(); ++j) {
      if (j == i) continue;
      const bool weakly = (set[j].values.array() >= set[i].values.array()).all();
      if (!weakly) continue;
      const bool equal = set[j].values == set[i].values;
      if (!equal || j < i) {
        dominated[i] = true;
        break;
      }
    }
  }
  std::vector<AlphaVector> kept;
  kept.reserve(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (!dominated[i]) kept.push_back(std::move(set[i]));
  }
  return kept;
}

}  // namespace

std::vector<int> PomdpModel::reveal_actions() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (actions[i].kind == ActionKind::Reveal) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<int> PomdpModel::execute_actions() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (actions[i].kind == ActionKind::Execute) out.push_back(static_cast<int>(i));
  }
  return out;
}

void PomdpModel::validate() const {
  if (num_states < 1) throw Error(ErrorCode::InvalidModel, "model needs at least one state");
  if (num_observations < 1) {
    throw Error(ErrorCode::InvalidModel, "model needs at least one observation");
  }
  if (reveal_cost < 0.0) throw Error(ErrorCode::InvalidModel, "reveal_cost must be >= 0");
  if (horizon < 0) throw Error(ErrorCode::InvalidModel, "horizon must be >= 0");
  if (execute_actions().empty()) {
    throw Error(ErrorCode::InvalidModel, "model needs at least one execute action");
  }
  for (const ActionSpec& a : actions) {
    if (a.kind == ActionKind::Reveal) {
      if (a.transition.rows() != num_states || a.transition.cols() != num_states) {
        throw Error(ErrorCode::InvalidModel,
                    "reveal action '" + a.name + "' transition must be " +
                        std::to_string(num_states) + "x" + std::to_string(num_states));
      }
      if (a.observation.rows() != num_states || a.observation.cols() != num_observations) {
        throw Error(ErrorCode::InvalidModel,
                    "reveal action '" + a.name + "' observation must be " +
                        std::to_string(num_states) + "x" + std::to_string(num_observations));
      }
      if (!row_stochastic(a.transition)) {
        throw Error(ErrorCode::InvalidModel,
                    "reveal action '" + a.name + "' transition rows must be distributions");
      }
      if (!row_stochastic(a.observation)) {
        throw Error(ErrorCode::InvalidModel,
                    "reveal action '" + a.name + "' observation rows must be distributions");
      }
    } else {
      if (a.reward.size() != num_states) {
        throw Error(ErrorCode::InvalidModel, "execute action '" + a.name + "' reward must have " +
                                                 std::to_string(num_states) + " entries");
      }
    }
  }
}

double observation_probability(const PomdpModel& m, const BeliefState& b, int action,
                               int observation) {
  const ActionSpec& a = reveal_spec(m, action);
  if (observation < 0 || observation >= m.num_observations) {
    throw Error(ErrorCode::InvalidModel, "observation index out of range");
  }
  const Eigen::VectorXd predicted = a.transition.transpose() * b.probs;
  return a.observation.col(observation).dot(predicted);
}

BeliefState update_belief(const PomdpModel& m, const BeliefState& b, int action, int observation) {
  const ActionSpec& a = reveal_spec(m, action);
  if (observation < 0 || observation >= m.num_observations) {
    throw Error(ErrorCode::InvalidModel, "observation index out of range");
  }
  const Eigen::VectorXd predicted = a.transition.transpose() * b.probs;
  Eigen::VectorXd unnormalized = a.observation.col(observation).cwiseProduct(predicted);
  const double evidence = unnormalized.sum();
  if (evidence <= 0.0) {
    throw Error(ErrorCode::ImpossibleObservation,
                "observation " + std::to_string(observation) + " has zero probability under '" +
                    a.name + "'");
  }
  return {unnormalized / evidence};
}

ExecuteValue value_execute_now(const PomdpModel& m, const BeliefState& b) {
  const std::vector<int> execs = m.execute_actions();
  if (execs.empty()) throw Error(ErrorCode::InvalidModel, "model has no execute action");
  ExecuteValue best{m.actions[execs[0]].reward.dot(b.probs), execs[0]};
  for (std::size_t i = 1; i < execs.size(); ++i) {
    const double v = m.actions[execs[i]].reward.dot(b.probs);
    if (v > best.value) best = {v, execs[i]};
  }
  return best;
}

double value_of_information(const PomdpModel& m, const BeliefState& b, int reveal_action) {
  reveal_spec(m, reveal_action);
  double expected_posterior_value = 0.0;
  for (int o = 0; o < m.num_observations; ++o) {
    const double p = observation_probability(m, b, reveal_action, o);
    if (p <= 0.0) continue;
    expected_posterior_value += p * value_execute_now(m, update_belief(m, b, reveal_action, o)).value;
  }
  return expected_posterior_value - value_execute_now(m, b).value - m.reveal_cost;
}

int decide(const PomdpModel& m, const BeliefState& b) {
  double best_voi = 0.0;
  int best_reveal = -1;
  for (int a : m.reveal_actions()) {
    const double voi = value_of_information(m, b, a);
    if (best_reveal < 0 || voi > best_voi) {
      best_voi = voi;
      best_reveal = a;
    }
  }
  if (best_reveal >= 0 && best_voi > 0.0) return best_reveal;
  return value_execute_now(m, b).action;
}

double ValueFunction::evaluate(int h, const BeliefState& b) const {
  return best(h, b).values.dot(b.probs);
}

const AlphaVector& ValueFunction::best(int h, const BeliefState& b) const {
  const std::vector<AlphaVector>& set = stages_.at(h);
  const AlphaVector* arg = &set.front();
  double best_value = arg->values.dot(b.probs);
  for (const AlphaVector& alpha : set) {
    const double v = alpha.values.dot(b.probs);
    if (v > best_value) {
      best_value = v;
      arg = &alpha;
    }
  }
  return *arg;
}

ValueFunction value_iteration(const PomdpModel& m) {
  m.validate();

  std::vector<AlphaVector> base;
  for (int a : m.execute_actions()) {
    base.push_back({m.actions[a].reward, a});
  }
  base = prune_dominated(std::move(base));

  std::vector<std::vector<AlphaVector>> stages;
  stages.push_back(base);

  for (int h = 1; h <= m.horizon; ++h) {
    const std::vector<AlphaVector>& prev = stages.back();
    // Executing is terminal, so the execute certificates carry over verbatim.
    std::vector<AlphaVector> next = base;
    std::size_t generated = base.size();

    for (int a : m.reveal_actions()) {
      const ActionSpec& spec = m.actions[a];
      // Cross-sum over observations: every way of pairing each observation
      // with a next-stage certificate yields one candidate vector.
      std::vector<Eigen::VectorXd> partial{
          Eigen::VectorXd::Constant(m.num_states, -m.reveal_cost)};
      for (int o = 0; o < m.num_observations; ++o) {
        std::vector<Eigen::VectorXd> projected;
        projected.reserve(prev.size());
        for (const AlphaVector& alpha : prev) {
          projected.push_back(backproject(spec, o, alpha.values));
        }
        std::vector<Eigen::VectorXd> combined;
        combined.reserve(partial.size() * projected.size());
        for (const Eigen::VectorXd& p : partial) {
          for (const Eigen::VectorXd& g : projected) {
            combined.push_back(p + g);
          }
        }
        generated += combined.size();
        if (generated > kMaxGeneratedVectors) {
          throw Error(ErrorCode::StateSpaceTooLarge,
                      "stage " + std::to_string(h) + " generated more than " +
                          std::to_string(kMaxGeneratedVectors) + " vectors");
        }
        // Prune between observation factors to keep the cross-sum tractable.
        std::vector<AlphaVector> tagged;
        tagged.reserve(combined.size());
        for (Eigen::VectorXd& v : combined) tagged.push_back({std::move(v), a});
        tagged = prune_dominated(std::move(tagged));
        partial.clear();
        partial.reserve(tagged.size());
        for (AlphaVector& t : tagged) partial.push_back(std::move(t.values));
      }
      for (Eigen::VectorXd& v : partial) next.push_back({std::move(v), a});
    }

    stages.push_back(prune_dominated(std::move(next)));
  }

  return ValueFunction(std::move(stages));
}

PomdpModel symmetric_toy(double accuracy, double reveal_cost, int horizon) {
  if (accuracy < 0.0 || accuracy > 1.0) {
    throw Error(ErrorCode::InvalidModel, "accuracy must lie in [0, 1]");
  }
  PomdpModel m;
  m.num_states = 2;
  m.num_observations = 2;
  m.reveal_cost = reveal_cost;
  m.horizon = horizon;

  ActionSpec probe;
  probe.name = "probe";
  probe.kind = ActionKind::Reveal;
  probe.transition = Eigen::MatrixXd::Identity(2, 2);
  probe.observation.resize(2, 2);
  probe.observation << accuracy, 1.0 - accuracy, 1.0 - accuracy, accuracy;
  m.actions.push_back(std::move(probe));

  for (int s = 0; s < 2; ++s) {
    ActionSpec commit;
    commit.name = "commit-" + std::to_string(s);
    commit.kind = ActionKind::Execute;
    commit.reward = Eigen::VectorXd::Zero(2);
    commit.reward(s) = 1.0;
    m.actions.push_back(std::move(commit));
  }

  m.validate();
  return m;
}

namespace {

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) {
    throw Error(ErrorCode::InvalidModel, what + " must be a non-empty array of rows");
  }
  const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
  if (cols == 0) throw Error(ErrorCode::InvalidModel, what + " rows must be non-empty arrays");
  Eigen::MatrixXd m(j.size(), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    const nlohmann::json& row = j[r];
    if (!row.is_array() || row.size() != cols) {
      throw Error(ErrorCode::InvalidModel, what + " rows must all have " + std::to_string(cols) +
                                               " entries");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!row[c].is_number()) throw Error(ErrorCode::InvalidModel, what + " entries must be numbers");
      m(r, c) = row[c].get<double>();
    }
  }
  return m;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) {
    throw Error(ErrorCode::InvalidModel, what + " must be a non-empty array");
  }
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw Error(ErrorCode::InvalidModel, what + " entries must be numbers");
    v(i) = j[i].get<double>();
  }
  return v;
}

}  // namespace

PomdpModel parse_model_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorCode::InvalidModel, "model file is not a JSON object");
  }

  PomdpModel m;
  try {
    m.num_states = j.at("states").get<Eigen::Index>();
    m.num_observations = j.at("observations").get<Eigen::Index>();
    m.horizon = j.value("horizon", 0);
    m.reveal_cost = j.value("reveal_cost", 0.0);
    const nlohmann::json& actions = j.at("actions");
    if (!actions.is_array() || actions.empty()) {
      throw Error(ErrorCode::InvalidModel, "model needs a non-empty actions array");
    }
    for (std::size_t i = 0; i < actions.size(); ++i) {
      const nlohmann::json& ja = actions[i];
      ActionSpec spec;
      spec.name = ja.value("name", "action-" + std::to_string(i));
      const std::string kind = ja.at("kind").get<std::string>();
      if (kind == "reveal") {
        spec.kind = ActionKind::Reveal;
        spec.transition = matrix_from_json(ja.at("transition"), spec.name + " transition");
        spec.observation = matrix_from_json(ja.at("observation"), spec.name + " observation");
      } else if (kind == "execute") {
        spec.kind = ActionKind::Execute;
        spec.reward = vector_from_json(ja.at("reward"), spec.name + " reward");
      } else {
        throw Error(ErrorCode::InvalidModel,
                    "action kind must be 'reveal' or 'execute', got '" + kind + "'");
      }
      m.actions.push_back(std::move(spec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidModel, std::string("malformed model: ") + e.what());
  }

  m.validate();
  return m;
}

PomdpModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open model file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model_json(buf.str());
}

}  // namespace skillbench::pomdp
