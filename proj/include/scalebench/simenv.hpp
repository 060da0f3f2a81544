#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <string_view>

#include "scalebench/workload.hpp"

namespace scalebench {

/// Service response model. Rates are req/min; CPU in percent.
struct CalibrationParams {
  double cpu_base = 5.0;
  double cpu_slope = 0.7;
  double lat_base = 50.0;
  double lat_coeff = 0.08;
  double lat_exp = 1.5;
  double overload_alpha = 2.0;
  double slo_p95_ms = 500.0;
  double slo_err = 0.05;
  double cost_per_replica_step = 0.01;
  double mem_base = 100.0;
  double mem_slope = 0.5;

  void validate() const;
};

/// Cost/penalty trade-off. When the bounds are unset they are derived from
/// the replica limits: r_min = -(c_rep * max + lambda), r_max = -c_rep * min.
struct RewardParams {
  double c_rep = 0.01;
  double lambda = 1.0;
  std::optional<double> r_min;
  std::optional<double> r_max;
};

/// Resolved normalization bounds.
struct RewardBounds {
  double r_min;
  double r_max;
};

inline constexpr double kMemCeilingMb = 512.0;

struct Observation {
  double cpu = 0.0;       // observed CPU, clamped to [0, 100]
  double mem = 0.0;       // MB in [0, 512]
  double qps = 0.0;       // offered load, req/min
  double p95 = 0.0;       // ms
  double err_rate = 0.0;  // [0, 1]
  int replicas = 1;

  /// Wire order: cpu, mem, qps, p95, err_rate, replicas.
  std::array<double, 6> to_array() const;

  bool operator==(const Observation&) const = default;
};

/// Replica delta in {-2, -1, 0, +1, +2}.
struct Action {
  int delta = 0;

  static constexpr int kMin = -2;
  static constexpr int kMax = 2;
  static constexpr int kCount = 5;

  /// Throws DomainError outside [-2, 2].
  static Action from_delta(int delta);
  static Action from_index(int index) { return Action{index + kMin}; }
  int index() const { return delta - kMin; }

  bool operator==(const Action&) const = default;
};

enum class ViolationCounting { PerStep, PerSecond };

std::string_view to_string(ViolationCounting counting);
std::optional<ViolationCounting> parse_violation_counting(std::string_view name);

struct StepOutcome {
  Observation obs;
  double reward_raw = 0.0;
  double reward_norm = 0.0;
  double step_cost = 0.0;
  bool slo_violated = false;
  int violation_units = 0;
  bool terminated = false;
};

struct EnvConfig {
  CalibrationParams calibration;
  RewardParams reward;
  /// Workload the per-episode trace is generated from (file key "trace").
  WorkloadSpec workload = default_spec(WorkloadKind::Constant);
  int episode_steps = 240;
  double step_seconds = 15.0;
  int max_replicas = 10;
  int min_replicas = 1;
  ViolationCounting violation_counting = ViolationCounting::PerStep;
  /// Steps between a scaling decision and the new count taking effect.
  int actuation_delay_steps = 0;

  void validate() const;
  RewardBounds reward_bounds() const;
};

/// `cfg` serving `kind`: keeps the configured workload parameters when the
/// kinds match, otherwise uses that kind's defaults.
EnvConfig with_workload(const EnvConfig& cfg, WorkloadKind kind);

struct CpuReading {
  double raw;       // unclamped; drives overload terms
  double observed;  // clamped to [0, 100]
};

CpuReading cpu_util(double rate, int replicas, const CalibrationParams& cal);
double p95_latency(double rate, int replicas, double raw_cpu, const CalibrationParams& cal);
double error_rate(double raw_cpu);
double memory_mb(double rate, int replicas, const CalibrationParams& cal);
int apply_action(int replicas, Action action, int min_replicas = 1, int max_replicas = 10);

struct Reward {
  double raw;
  double norm;
};

Reward reward(int replicas, bool slo_violated, const RewardParams& params, const RewardBounds& bounds);
/// Uses the analytic bounds for replicas in [1, 10].
Reward reward(int replicas, bool slo_violated, const RewardParams& params);

/// Observation and SLO verdict for serving `rate` with `replicas`.
struct ServiceSample {
  Observation obs;
  double raw_cpu;
  bool slo_violated;
};

ServiceSample sample_service(double rate, int replicas, const CalibrationParams& cal);

/// One episode of the resource-control MDP. Single caller; not thread-safe.
class Environment {
 public:
  explicit Environment(EnvConfig cfg);

  /// Regenerates the trace from (workload, seed) and returns the initial
  /// observation at rates[0] with min_replicas.
  Observation reset(std::uint64_t seed);

  /// Throws ProtocolError before reset or after termination.
  StepOutcome step(Action action);

  const EnvConfig& config() const { return cfg_; }
  const Trace& trace() const { return trace_; }
  int step_index() const { return step_index_; }
  int replicas() const { return replicas_; }
  bool active() const { return active_; }
  bool terminated() const { return terminated_; }

 private:
  EnvConfig cfg_;
  RewardBounds bounds_;
  Trace trace_;
  int replicas_ = 1;
  int desired_ = 1;
  int step_index_ = 0;
  bool active_ = false;
  bool terminated_ = false;
  std::deque<int> pending_;  // scheduled replica targets under actuation delay
};

}  // namespace scalebench
