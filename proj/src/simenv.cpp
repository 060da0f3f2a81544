#include "scalebench/simenv.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "scalebench/errors.hpp"

namespace scalebench {

namespace {

void require(bool ok, const char* field, const char* what) {
  if (!ok) throw ValidationError(field, what);
}

void require_non_negative(double value, const char* field) {
  require(std::isfinite(value) && value >= 0.0, field, "must be a non-negative number");
}

}  // namespace

void CalibrationParams::validate() const {
  require_non_negative(cpu_base, "cpu_base");
  require_non_negative(cpu_slope, "cpu_slope");
  require_non_negative(lat_base, "lat_base");
  require_non_negative(lat_coeff, "lat_coeff");
  require_non_negative(lat_exp, "lat_exp");
  require_non_negative(overload_alpha, "overload_alpha");
  require_non_negative(slo_p95_ms, "slo_p95_ms");
  require(std::isfinite(slo_err) && slo_err > 0.0 && slo_err < 1.0, "slo_err", "must lie in (0, 1)");
  require_non_negative(cost_per_replica_step, "cost_per_replica_step");
  require_non_negative(mem_base, "mem_base");
  require_non_negative(mem_slope, "mem_slope");
}

std::array<double, 6> Observation::to_array() const {
  return {cpu, mem, qps, p95, err_rate, static_cast<double>(replicas)};
}

Action Action::from_delta(int delta) {
  if (delta < kMin || delta > kMax) {
    throw DomainError("action delta " + std::to_string(delta) + " outside [-2, 2]");
  }
  return Action{delta};
}

std::string_view to_string(ViolationCounting counting) {
  return counting == ViolationCounting::PerStep ? "PerStep" : "PerSecond";
}

std::optional<ViolationCounting> parse_violation_counting(std::string_view name) {
  if (name == "PerStep") return ViolationCounting::PerStep;
  if (name == "PerSecond") return ViolationCounting::PerSecond;
  return std::nullopt;
}

EnvConfig with_workload(const EnvConfig& cfg, WorkloadKind kind) {
  EnvConfig out = cfg;
  if (out.workload.kind != kind) out.workload = default_spec(kind);
  return out;
}

void EnvConfig::validate() const {
  calibration.validate();
  workload.validate();
  require(episode_steps >= 1, "episode_steps", "must be at least 1");
  require(std::isfinite(step_seconds) && step_seconds > 0.0, "step_seconds", "must be positive");
  require(min_replicas >= 1, "min_replicas", "must be at least 1");
  require(max_replicas >= min_replicas, "max_replicas", "must not be below min_replicas");
  require(actuation_delay_steps >= 0, "actuation_delay_steps", "must be non-negative");
  require_non_negative(reward.c_rep, "c_rep");
  require_non_negative(reward.lambda, "lambda");
  const RewardBounds bounds = reward_bounds();
  if (!(bounds.r_min < bounds.r_max)) throw ConfigError("reward bounds require r_min < r_max");
  if (bounds.r_max > 0.0) throw ConfigError("reward bounds require r_max <= 0");
}

RewardBounds EnvConfig::reward_bounds() const {
  return {reward.r_min.value_or(-(reward.c_rep * max_replicas + reward.lambda)),
          reward.r_max.value_or(-(reward.c_rep * min_replicas))};
}

CpuReading cpu_util(double rate, int replicas, const CalibrationParams& cal) {
  if (replicas < 1) throw DomainError("cpu_util requires at least one replica");
  const double raw = cal.cpu_base + (rate / replicas) * cal.cpu_slope;
  return {raw, std::clamp(raw, 0.0, 100.0)};
}

double p95_latency(double rate, int replicas, double raw_cpu, const CalibrationParams& cal) {
  if (replicas < 1) throw DomainError("p95_latency requires at least one replica");
  const double base = cal.lat_base + std::pow(rate / replicas, cal.lat_exp) * cal.lat_coeff;
  if (raw_cpu > 100.0) return base * std::exp(cal.overload_alpha * (raw_cpu - 100.0) / 100.0);
  return base;
}

double error_rate(double raw_cpu) {
  if (raw_cpu <= 100.0) return 0.0;
  return std::min(1.0, (raw_cpu - 100.0) / 100.0);
}

double memory_mb(double rate, int replicas, const CalibrationParams& cal) {
  if (replicas < 1) throw DomainError("memory_mb requires at least one replica");
  return std::clamp(cal.mem_base + cal.mem_slope * rate / replicas, 0.0, kMemCeilingMb);
}

int apply_action(int replicas, Action action, int min_replicas, int max_replicas) {
  return std::clamp(replicas + action.delta, min_replicas, max_replicas);
}

Reward reward(int replicas, bool slo_violated, const RewardParams& params, const RewardBounds& bounds) {
  if (!(bounds.r_min < bounds.r_max)) throw ConfigError("reward bounds require r_min < r_max");
  const double raw = -(params.c_rep * replicas + params.lambda * (slo_violated ? 1.0 : 0.0));
  const double norm = (raw - bounds.r_min) / (bounds.r_max - bounds.r_min) - 1.0;
  return {raw, std::clamp(norm, -1.0, 0.0)};
}

Reward reward(int replicas, bool slo_violated, const RewardParams& params) {
  EnvConfig cfg;
  cfg.reward = params;
  return reward(replicas, slo_violated, params, cfg.reward_bounds());
}

ServiceSample sample_service(double rate, int replicas, const CalibrationParams& cal) {
  const CpuReading cpu = cpu_util(rate, replicas, cal);
  ServiceSample sample;
  sample.raw_cpu = cpu.raw;
  sample.obs.cpu = cpu.observed;
  sample.obs.mem = memory_mb(rate, replicas, cal);
  sample.obs.qps = rate;
  sample.obs.p95 = p95_latency(rate, replicas, cpu.raw, cal);
  sample.obs.err_rate = error_rate(cpu.raw);
  sample.obs.replicas = replicas;
  sample.slo_violated = sample.obs.p95 >= cal.slo_p95_ms || sample.obs.err_rate >= cal.slo_err;
  return sample;
}

Environment::Environment(EnvConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  bounds_ = cfg_.reward_bounds();
}

Observation Environment::reset(std::uint64_t seed) {
  trace_ = generate_trace(cfg_.workload, seed, cfg_.episode_steps);
  replicas_ = cfg_.min_replicas;
  desired_ = replicas_;
  pending_.clear();
  step_index_ = 0;
  active_ = true;
  terminated_ = false;
  return sample_service(trace_.rates.front(), replicas_, cfg_.calibration).obs;
}

StepOutcome Environment::step(Action action) {
  if (!active_) throw ProtocolError("step before reset");
  if (terminated_) throw ProtocolError("step after termination");

  desired_ = apply_action(desired_, action, cfg_.min_replicas, cfg_.max_replicas);
  pending_.push_back(desired_);
  if (static_cast<int>(pending_.size()) > cfg_.actuation_delay_steps) {
    replicas_ = pending_.front();
    pending_.pop_front();
  }

  const double rate = trace_.rates[static_cast<std::size_t>(step_index_)];
  const ServiceSample sample = sample_service(rate, replicas_, cfg_.calibration);

  StepOutcome out;
  out.obs = sample.obs;
  out.slo_violated = sample.slo_violated;
  if (sample.slo_violated) {
    out.violation_units = cfg_.violation_counting == ViolationCounting::PerStep
                              ? 1
                              : static_cast<int>(std::ceil(cfg_.step_seconds));
  }
  const Reward r = reward(replicas_, sample.slo_violated, cfg_.reward, bounds_);
  out.reward_raw = r.raw;
  out.reward_norm = r.norm;
  out.step_cost = cfg_.calibration.cost_per_replica_step * replicas_;

  ++step_index_;
  terminated_ = step_index_ >= cfg_.episode_steps;
  out.terminated = terminated_;
  return out;
}

}  // namespace scalebench
