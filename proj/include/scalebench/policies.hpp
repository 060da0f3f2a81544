#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scalebench/rng.hpp"
#include "scalebench/simenv.hpp"

namespace scalebench {

enum class PolicyKind { Hpa, Random, QLearning, External };

std::string_view to_string(PolicyKind kind);

/// A controller that maps observations to replica deltas. One instance per
/// episode caller.
class Policy {
 public:
  virtual ~Policy() = default;
  /// Called before every episode with the episode seed.
  virtual void reset(std::uint64_t seed) { (void)seed; }
  virtual Action decide(const Observation& obs) = 0;
};

// ---------------------------------------------------------------------------
// Horizontal pod autoscaler

struct HpaConfig {
  double target_cpu = 70.0;
  int min_replicas = 1;
  int max_replicas = 10;
  int cooldown_steps = 0;

  void validate() const;
};

/// desired = ceil(replicas * cpu / target), clamped to [min, max];
/// min_replicas when the observed CPU is zero.
int hpa_decide(const Observation& obs, const HpaConfig& cfg);

/// Moves toward `target` by at most two replicas.
Action target_to_delta(int current, int target);

class HpaPolicy final : public Policy {
 public:
  explicit HpaPolicy(HpaConfig cfg);
  void reset(std::uint64_t seed) override;
  Action decide(const Observation& obs) override;

 private:
  HpaConfig cfg_;
  int steps_since_change_ = 0;
};

// ---------------------------------------------------------------------------
// Uniform random

Action random_decide(Rng& rng);

class RandomPolicy final : public Policy {
 public:
  void reset(std::uint64_t seed) override;
  Action decide(const Observation& obs) override;

 private:
  Rng rng_{0};
};

/// Always emits the same delta; used for scripted parity runs.
class FixedPolicy final : public Policy {
 public:
  explicit FixedPolicy(Action action) : action_(action) {}
  Action decide(const Observation&) override { return action_; }

 private:
  Action action_;
};

// ---------------------------------------------------------------------------
// Continuous-action bridge

/// Maps x in [-1, 1] onto the five deltas with left-closed bins at
/// -0.6, -0.2, 0.2, 0.6. Inputs outside [-1, 1] are clamped first; non-finite
/// inputs throw DomainError.
Action map_box_action(double x);

// ---------------------------------------------------------------------------
// Tabular Q-learning reference agent

struct QTableConfig {
  int cpu_buckets = 10;
  double learning_rate = 0.1;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  /// Fraction of training over which epsilon decays linearly.
  double exploration_fraction = 1.0;
  double discount = 0.99;
  int training_steps = 50000;
  WorkloadKind train_workload = WorkloadKind::Variable;

  void validate() const;
};

/// Q values over (cpu bucket x replica level) x 5 actions.
class QTable {
 public:
  QTable(int cpu_buckets, int min_replicas, int max_replicas);

  int cpu_buckets() const { return cpu_buckets_; }
  int min_replicas() const { return min_replicas_; }
  int replica_levels() const { return replica_levels_; }
  int state_count() const { return cpu_buckets_ * replica_levels_; }

  int state_index(const Observation& obs) const;
  double& at(int state, int action);
  double at(int state, int action) const;
  /// Highest-valued action; ties go to the lowest action index.
  Action greedy(int state) const;
  double max_value(int state) const;

  const std::vector<double>& values() const { return values_; }
  std::string config_hash;

  bool operator==(const QTable& other) const;

 private:
  int cpu_buckets_;
  int min_replicas_;
  int replica_levels_;
  std::vector<double> values_;
};

/// Trains on the configured training workload (Variable by default) for
/// qcfg.training_steps transitions. Deterministic in `seed`.
QTable qlearn_train(const EnvConfig& env_cfg, const QTableConfig& qcfg, std::uint64_t seed);

std::string qtable_config_hash(const EnvConfig& env_cfg, const QTableConfig& qcfg);

void save_qtable(const QTable& table, std::ostream& out);
QTable load_qtable(std::istream& in);
void save_qtable(const QTable& table, const std::filesystem::path& path);
QTable load_qtable(const std::filesystem::path& path);

/// Greedy evaluation of a frozen table. The table may be shared.
class QLearningPolicy final : public Policy {
 public:
  explicit QLearningPolicy(std::shared_ptr<const QTable> table);
  Action decide(const Observation& obs) override;

 private:
  std::shared_ptr<const QTable> table_;
};

}  // namespace scalebench
