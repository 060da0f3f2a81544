#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace scalebench {

enum class WorkloadKind { Constant, Periodic, Variable, Bursty, Ramp, Flash };

inline constexpr std::array<WorkloadKind, 6> kAllWorkloads = {
    WorkloadKind::Constant, WorkloadKind::Periodic, WorkloadKind::Variable,
    WorkloadKind::Bursty,   WorkloadKind::Ramp,     WorkloadKind::Flash};

/// Lower-case name, e.g. "bursty".
std::string_view to_string(WorkloadKind kind);
std::optional<WorkloadKind> parse_workload(std::string_view name);
/// "constant, periodic, variable, bursty, ramp, flash"
std::string workload_names();

/// Parameters of one traffic pattern. Rates are in requests per minute and
/// durations in decision steps. Each kind reads only the fields it needs;
/// `lower`/`upper` are the declared range every generated rate is clamped to.
struct WorkloadSpec {
  WorkloadKind kind = WorkloadKind::Constant;

  double base_rate = 100.0;   // constant/bursty/flash level, periodic midline, walk start
  double amplitude = 0.0;     // periodic half swing
  int period_steps = 40;      // periodic
  double noise_sd = 0.0;      // additive Gaussian noise
  double spike_multiplier = 3.0;  // flash level = multiplier x base
  double spike_rate = 0.05;   // bursty: expected spike arrivals per step
  int spike_decay_steps = 4;  // bursty: spike lifetime
  int walk_step = 15;         // variable: max |increment|
  double ramp_start = 50.0;
  double ramp_end = 250.0;
  int flash_start = 80;
  int flash_duration = 40;

  double lower = 0.0;
  double upper = 1e9;
  double rate_floor = 0.0;

  /// Throws ValidationError naming the first invalid field.
  void validate() const;
};

/// The calibrated default for each kind.
WorkloadSpec default_spec(WorkloadKind kind);

/// A realized request-rate series, one entry per decision step.
struct Trace {
  WorkloadSpec spec;
  std::uint64_t seed = 0;
  std::vector<double> rates;
};

/// Pure function of (spec, seed, steps). Throws ValidationError for invalid
/// specs or steps < 1.
Trace generate_trace(const WorkloadSpec& spec, std::uint64_t seed, int steps);

/// Writes `step,rate_req_per_min` CSV with six decimals per rate.
void write_trace_csv(const Trace& trace, std::ostream& out);

}  // namespace scalebench
