#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "scalebench/metrics.hpp"
#include "scalebench/policies.hpp"

namespace scalebench {

inline const std::vector<std::uint64_t> kDefaultSeeds = {42, 123, 456, 789, 1024};

/// One policy column of the evaluation grid.
struct PolicySpec {
  std::string id;
  PolicyKind kind = PolicyKind::Hpa;
  HpaConfig hpa;
  QTableConfig qlearn;
  /// When set, used for every seed instead of training one table per seed.
  std::shared_ptr<const QTable> qtable;
  /// External agents: "tcp:HOST:PORT" or "exec:COMMAND".
  std::string endpoint;
  double agent_timeout_s = 30.0;

  static PolicySpec hpa_policy(std::string id = "hpa", HpaConfig cfg = {});
  static PolicySpec random_policy(std::string id = "random");
  static PolicySpec qlearn_policy(std::string id = "qlearn", QTableConfig cfg = {});
  static PolicySpec external_policy(std::string id, std::string endpoint);
};

struct EvalProtocol {
  std::vector<std::uint64_t> seeds = kDefaultSeeds;
  int episode_steps = 240;
  std::vector<WorkloadKind> workloads{kAllWorkloads.begin(), kAllWorkloads.end()};
  std::vector<PolicySpec> policies;
  /// Episode concurrency; 0 means the host's logical core count.
  int parallelism = 0;

  void validate() const;
};

/// Runs one in-process episode. `env_cfg.workload` selects the traffic.
EpisodeMetrics run_episode(const EnvConfig& env_cfg, Policy& policy, const std::string& policy_id,
                           std::uint64_t seed);

/// |policies| x |workloads| x |seeds| records in grid order (policy, then
/// workload, then seed), independent of parallelism. Each episode's trace
/// seed equals its episode seed. Failed external episodes are kept and
/// flagged.
std::vector<EpisodeMetrics> run_grid(const EvalProtocol& protocol, const EnvConfig& env_cfg);

// ---------------------------------------------------------------------------
// Aggregation

struct AggregateCell {
  double mean = 0.0;
  double std = 0.0;  // sample (n - 1)
  double ci_low = 0.0;
  double ci_high = 0.0;
  int n = 0;
  bool missing = true;
};

/// Mean, sample std and a percentile-bootstrap 95% CI (1000 resamples,
/// seeded from `bootstrap_seed`). Input order does not matter.
AggregateCell summarize(std::vector<double> values, std::uint64_t bootstrap_seed);

enum class Metric { Cost, Violations, Replicas };

struct CellStats {
  AggregateCell cost;
  AggregateCell violations;
  AggregateCell replicas;
  int failed = 0;

  const AggregateCell& get(Metric metric) const;
};

struct AggregateTable {
  std::vector<std::string> policies;
  std::vector<WorkloadKind> workloads;
  std::map<std::pair<std::string, WorkloadKind>, CellStats> cells;
  int failed_episodes = 0;

  /// Missing cells return a default (missing) CellStats.
  const CellStats& at(const std::string& policy, WorkloadKind workload) const;
};

/// Groups successful records per (policy, workload). Failed records are
/// counted, never averaged. Rows follow `policy_order` when given (unknown ids
/// appended sorted), otherwise sorted ids; columns follow the canonical
/// workload order.
AggregateTable aggregate(const std::vector<EpisodeMetrics>& records,
                         const std::vector<std::string>& policy_order = {});

// ---------------------------------------------------------------------------
// Derived analyses

struct CompositeMatrix {
  std::vector<std::string> policies;
  std::vector<WorkloadKind> workloads;
  /// score[p][w] in [0, 1]; nullopt where the column is undefined (fewer
  /// than two policies with data) or the cell is missing.
  std::vector<std::vector<std::optional<double>>> score;
  std::vector<bool> defined;
};

CompositeMatrix composite_scores(const AggregateTable& table);

struct RankMatrix {
  std::vector<std::string> viable;
  std::vector<std::string> excluded;
  std::vector<WorkloadKind> workloads;
  /// rank[i][w] for viable[i]; 1 is best.
  std::vector<std::vector<int>> rank;
  /// max rank - min rank across workloads, per viable policy.
  std::vector<int> max_shift;
};

RankMatrix rank_matrix(const AggregateTable& table, double viable_threshold = 100.0);

struct ParetoPoint {
  std::string policy;
  WorkloadKind workload = WorkloadKind::Constant;
  double cost = 0.0;
  double violations = 0.0;

  bool operator==(const ParetoPoint&) const = default;
};

/// Non-dominated subset in input order; repeated (policy, workload) entries
/// keep their first occurrence. O(n log n).
std::vector<ParetoPoint> pareto_front(const std::vector<ParetoPoint>& points);

/// One point per (policy, workload) cell with data, from mean cost and mean
/// violations.
std::vector<ParetoPoint> pareto_points(const AggregateTable& table);

struct TransferRow {
  std::string policy;
  WorkloadKind shifted = WorkloadKind::Constant;
  bool training_free = false;
  double train_violations = 0.0;
  double shifted_violations = 0.0;
  double delta_violations = 0.0;
  double train_cost = 0.0;
  double shifted_cost = 0.0;
  double delta_cost = 0.0;
  /// Lowest mean violations on the shifted workload (cost breaks ties).
  std::string most_robust;
  /// shifted_cost minus the most robust policy's cost on the same workload.
  double robustness_premium = 0.0;
  /// Learned policies only: shifted_cost minus the cheapest training-free
  /// policy's cost on the same workload.
  std::optional<double> transfer_tax;
};

inline const std::set<std::string> kTrainingFreePolicies = {"hpa", "random"};

/// Throws ReportError when the train workload (or any other workload) has no
/// data.
std::vector<TransferRow> transfer_report(const AggregateTable& table,
                                         WorkloadKind train_workload = WorkloadKind::Variable,
                                         const std::set<std::string>& training_free = kTrainingFreePolicies);

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EvalReport {
  AggregateTable aggregates;
  CompositeMatrix composite;
  RankMatrix ranks;
  std::vector<ParetoPoint> pareto;
  std::vector<TransferRow> transfer;
  /// Set when the transfer summary could not be produced.
  std::string transfer_error;
};

struct ReportOptions {
  double viable_threshold = 100.0;
  WorkloadKind train_workload = WorkloadKind::Variable;
  std::set<std::string> training_free = kTrainingFreePolicies;
  std::vector<std::string> policy_order;
};

EvalReport build_report(const std::vector<EpisodeMetrics>& records, const ReportOptions& options = {});

/// Writes cost.csv, violations.csv, replicas.csv, aggregates.csv,
/// composite.csv, ranks.csv, pareto.csv and transfer.csv into `dir`.
void write_report(const EvalReport& report, const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Results file: one JSON object per line.

std::string to_jsonl_line(const EpisodeMetrics& m);
EpisodeMetrics from_jsonl_line(const std::string& line);
void write_results(const std::vector<EpisodeMetrics>& records, std::ostream& out);
std::vector<EpisodeMetrics> read_results(std::istream& in);

}  // namespace scalebench
