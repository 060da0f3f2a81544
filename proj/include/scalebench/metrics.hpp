#pragma once

#include <cstdint>
#include <string>

#include "scalebench/simenv.hpp"

namespace scalebench {

/// Outcome of one (policy, workload, seed) episode.
struct EpisodeMetrics {
  std::string policy;
  WorkloadKind workload = WorkloadKind::Constant;
  std::uint64_t seed = 0;
  double total_cost_usd = 0.0;
  std::int64_t total_violations = 0;
  double mean_replicas = 0.0;
  int steps = 0;
  bool failed = false;
  /// Why a failed episode failed; not part of the results file.
  std::string failure;

  bool operator==(const EpisodeMetrics&) const = default;
};

/// Folds step outcomes into EpisodeMetrics. Cost is priced once from the
/// integer replica-step total, so it carries no summation drift.
class EpisodeAccumulator {
 public:
  explicit EpisodeAccumulator(double cost_per_replica_step) : price_(cost_per_replica_step) {}

  void add(const StepOutcome& out) {
    replica_steps_ += out.obs.replicas;
    violations_ += out.violation_units;
    ++steps_;
  }

  int steps() const { return steps_; }

  EpisodeMetrics finish(std::string policy, WorkloadKind workload, std::uint64_t seed) const {
    EpisodeMetrics m;
    m.policy = std::move(policy);
    m.workload = workload;
    m.seed = seed;
    m.total_cost_usd = price_ * static_cast<double>(replica_steps_);
    m.total_violations = violations_;
    m.mean_replicas = steps_ > 0 ? static_cast<double>(replica_steps_) / steps_ : 0.0;
    m.steps = steps_;
    return m;
  }

 private:
  double price_;
  std::int64_t replica_steps_ = 0;
  std::int64_t violations_ = 0;
  int steps_ = 0;
};

}  // namespace scalebench
