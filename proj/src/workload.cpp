#include "scalebench/workload.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>

#include "scalebench/errors.hpp"
#include "scalebench/rng.hpp"

namespace scalebench {

namespace {

// Keeps trace streams apart from policy and training streams sharing a seed.
constexpr std::uint64_t kTraceStream = 0x7472616365ULL;

void require(bool ok, const char* field, const char* what) {
  if (!ok) throw ValidationError(field, what);
}

void require_rate(double value, const char* field) {
  require(std::isfinite(value), field, "must be finite");
  require(value >= 0.0, field, "must be non-negative");
}

double reflect(double x, double lo, double hi) {
  if (x > hi) x = 2.0 * hi - x;
  if (x < lo) x = 2.0 * lo - x;
  return std::clamp(x, lo, hi);
}

}  // namespace

std::string_view to_string(WorkloadKind kind) {
  switch (kind) {
    case WorkloadKind::Constant: return "constant";
    case WorkloadKind::Periodic: return "periodic";
    case WorkloadKind::Variable: return "variable";
    case WorkloadKind::Bursty: return "bursty";
    case WorkloadKind::Ramp: return "ramp";
    case WorkloadKind::Flash: return "flash";
  }
  return "unknown";
}

std::optional<WorkloadKind> parse_workload(std::string_view name) {
  for (WorkloadKind kind : kAllWorkloads) {
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

std::string workload_names() {
  std::string names;
  for (WorkloadKind kind : kAllWorkloads) {
    if (!names.empty()) names += ", ";
    names += to_string(kind);
  }
  return names;
}

void WorkloadSpec::validate() const {
  require_rate(base_rate, "base_rate");
  require_rate(amplitude, "amplitude");
  require(period_steps >= 2, "period_steps", "must be at least 2");
  require(std::isfinite(noise_sd) && noise_sd >= 0.0, "noise_sd", "must be non-negative");
  require(std::isfinite(spike_multiplier) && spike_multiplier >= 0.0, "spike_multiplier",
          "must be non-negative");
  require(std::isfinite(spike_rate) && spike_rate >= 0.0, "spike_rate", "must be non-negative");
  require(spike_decay_steps >= 1, "spike_decay_steps", "must be at least 1");
  require(walk_step >= 0, "walk_step", "must be non-negative");
  require_rate(ramp_start, "ramp_start");
  require_rate(ramp_end, "ramp_end");
  require(flash_start >= 0, "flash_start", "must be non-negative");
  require(flash_duration >= 0, "flash_duration", "must be non-negative");
  require_rate(lower, "lower");
  require_rate(upper, "upper");
  require(lower <= upper, "upper", "must not be below lower");
  require_rate(rate_floor, "rate_floor");
  require(rate_floor <= upper, "rate_floor", "must not exceed upper");
}

WorkloadSpec default_spec(WorkloadKind kind) {
  WorkloadSpec spec;
  spec.kind = kind;
  switch (kind) {
    case WorkloadKind::Constant:
      spec.base_rate = 100.0;
      spec.noise_sd = 10.0 / 3.0;
      spec.lower = 90.0;
      spec.upper = 110.0;
      break;
    case WorkloadKind::Periodic:
      spec.base_rate = 125.0;
      spec.amplitude = 75.0;
      spec.period_steps = 40;
      spec.noise_sd = 5.0;
      spec.lower = 50.0;
      spec.upper = 200.0;
      break;
    case WorkloadKind::Variable:
      spec.base_rate = 140.0;
      spec.walk_step = 15;
      spec.lower = 30.0;
      spec.upper = 250.0;
      break;
    case WorkloadKind::Bursty:
      spec.base_rate = 100.0;
      spec.noise_sd = 10.0 / 3.0;
      spec.spike_rate = 0.05;
      spec.spike_decay_steps = 4;
      spec.lower = 50.0;
      spec.upper = 300.0;
      break;
    case WorkloadKind::Ramp:
      spec.ramp_start = 50.0;
      spec.ramp_end = 250.0;
      spec.noise_sd = 10.0 / 3.0;
      spec.lower = 50.0;
      spec.upper = 250.0;
      break;
    case WorkloadKind::Flash:
      spec.base_rate = 80.0;
      spec.spike_multiplier = 3.0;
      spec.flash_start = 80;
      spec.flash_duration = 40;
      spec.lower = 80.0;
      spec.upper = 240.0;
      break;
  }
  return spec;
}

Trace generate_trace(const WorkloadSpec& spec, std::uint64_t seed, int steps) {
  spec.validate();
  require(steps >= 1, "steps", "must be at least 1");

  Trace trace{spec, seed, {}};
  trace.rates.resize(static_cast<std::size_t>(steps));
  Rng rng(seed, kTraceStream + static_cast<std::uint64_t>(spec.kind));

  const double lo = std::max(spec.lower, spec.rate_floor);
  const double hi = spec.upper;
  auto noise = [&] { return spec.noise_sd > 0.0 ? rng.normal(0.0, spec.noise_sd) : 0.0; };

  switch (spec.kind) {
    case WorkloadKind::Constant:
      for (auto& rate : trace.rates) rate = spec.base_rate + noise();
      break;

    case WorkloadKind::Periodic:
      for (int k = 0; k < steps; ++k) {
        const double phase = 2.0 * std::numbers::pi * k / spec.period_steps;
        trace.rates[k] = spec.base_rate + spec.amplitude * std::sin(phase) + noise();
      }
      break;

    case WorkloadKind::Variable: {
      double level = std::clamp(spec.base_rate, lo, hi);
      for (auto& rate : trace.rates) {
        rate = level;
        level = reflect(level + static_cast<double>(rng.uniform_int(-spec.walk_step, spec.walk_step)),
                        lo, hi);
      }
      break;
    }

    case WorkloadKind::Bursty: {
      // Each arrival adds (upper - base) that decays linearly to zero over
      // spike_decay_steps; overlapping spikes stack before clamping.
      const double height = std::max(0.0, spec.upper - spec.base_rate);
      std::vector<double> extra(trace.rates.size() + spec.spike_decay_steps, 0.0);
      for (int k = 0; k < steps; ++k) {
        const std::uint32_t arrivals = rng.poisson(spec.spike_rate);
        for (int age = 0; age < spec.spike_decay_steps; ++age) {
          const double weight = static_cast<double>(spec.spike_decay_steps - age) / spec.spike_decay_steps;
          extra[k + age] += arrivals * height * weight;
        }
        trace.rates[k] = spec.base_rate + extra[k] + noise();
      }
      break;
    }

    case WorkloadKind::Ramp:
      for (int k = 0; k < steps; ++k) {
        const double t = steps > 1 ? static_cast<double>(k) / (steps - 1) : 0.0;
        trace.rates[k] = spec.ramp_start + (spec.ramp_end - spec.ramp_start) * t + noise();
      }
      break;

    case WorkloadKind::Flash: {
      const int end = spec.flash_start + spec.flash_duration;
      for (int k = 0; k < steps; ++k) {
        const bool spiking = k >= spec.flash_start && k < end;
        trace.rates[k] = (spiking ? spec.spike_multiplier * spec.base_rate : spec.base_rate) + noise();
      }
      break;
    }
  }

  for (auto& rate : trace.rates) rate = std::clamp(rate, lo, hi);
  return trace;
}

void write_trace_csv(const Trace& trace, std::ostream& out) {
  out << "step,rate_req_per_min\n";
  char buf[64];
  for (std::size_t k = 0; k < trace.rates.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f\n", k, trace.rates[k]);
    out << buf;
  }
}

}  // namespace scalebench
