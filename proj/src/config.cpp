#include "scalebench/config.hpp"

#include <cstdio>
#include <fstream>

#include "scalebench/errors.hpp"
#include "scalebench/wire_format.hpp"

namespace scalebench {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

template <typename T>
void read_field(const json& doc, const char* key, T& target) {
  const auto it = doc.find(key);
  if (it == doc.end()) return;
  try {
    target = it->get<T>();
  } catch (const json::exception&) {
    throw ValidationError(key, "has the wrong type");
  }
}

}  // namespace

ordered_json to_json(const WorkloadSpec& spec) {
  return ordered_json{{"kind", to_string(spec.kind)},
                      {"base_rate", spec.base_rate},
                      {"amplitude", spec.amplitude},
                      {"period_steps", spec.period_steps},
                      {"noise_sd", spec.noise_sd},
                      {"spike_multiplier", spec.spike_multiplier},
                      {"spike_rate", spec.spike_rate},
                      {"spike_decay_steps", spec.spike_decay_steps},
                      {"walk_step", spec.walk_step},
                      {"ramp_start", spec.ramp_start},
                      {"ramp_end", spec.ramp_end},
                      {"flash_start", spec.flash_start},
                      {"flash_duration", spec.flash_duration},
                      {"lower", spec.lower},
                      {"upper", spec.upper},
                      {"rate_floor", spec.rate_floor}};
}

WorkloadSpec workload_from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("trace", "must be an object");
  WorkloadKind kind = WorkloadKind::Constant;
  if (const auto it = doc.find("kind"); it != doc.end()) {
    const auto parsed = it->is_string() ? parse_workload(it->get<std::string>()) : std::nullopt;
    if (!parsed) throw ValidationError("kind", "must be one of " + workload_names());
    kind = *parsed;
  }
  WorkloadSpec spec = default_spec(kind);
  read_field(doc, "base_rate", spec.base_rate);
  read_field(doc, "amplitude", spec.amplitude);
  read_field(doc, "period_steps", spec.period_steps);
  read_field(doc, "noise_sd", spec.noise_sd);
  read_field(doc, "spike_multiplier", spec.spike_multiplier);
  read_field(doc, "spike_rate", spec.spike_rate);
  read_field(doc, "spike_decay_steps", spec.spike_decay_steps);
  read_field(doc, "walk_step", spec.walk_step);
  read_field(doc, "ramp_start", spec.ramp_start);
  read_field(doc, "ramp_end", spec.ramp_end);
  read_field(doc, "flash_start", spec.flash_start);
  read_field(doc, "flash_duration", spec.flash_duration);
  read_field(doc, "lower", spec.lower);
  read_field(doc, "upper", spec.upper);
  read_field(doc, "rate_floor", spec.rate_floor);
  spec.validate();
  return spec;
}

ordered_json to_json(const EnvConfig& cfg) {
  const CalibrationParams& cal = cfg.calibration;
  const RewardBounds bounds = cfg.reward_bounds();
  return ordered_json{
      {"calibration",
       {{"cpu_base", cal.cpu_base},
        {"cpu_slope", cal.cpu_slope},
        {"lat_base", cal.lat_base},
        {"lat_coeff", cal.lat_coeff},
        {"lat_exp", cal.lat_exp},
        {"overload_alpha", cal.overload_alpha},
        {"slo_p95_ms", cal.slo_p95_ms},
        {"slo_err", cal.slo_err},
        {"cost_per_replica_step", cal.cost_per_replica_step},
        {"mem_base", cal.mem_base},
        {"mem_slope", cal.mem_slope}}},
      {"reward",
       {{"c_rep", cfg.reward.c_rep},
        {"lambda", cfg.reward.lambda},
        {"r_min", bounds.r_min},
        {"r_max", bounds.r_max}}},
      {"trace", to_json(cfg.workload)},
      {"episode_steps", cfg.episode_steps},
      {"step_seconds", cfg.step_seconds},
      {"max_replicas", cfg.max_replicas},
      {"min_replicas", cfg.min_replicas},
      {"violation_counting", to_string(cfg.violation_counting)},
      {"actuation_delay_steps", cfg.actuation_delay_steps}};
}

EnvConfig env_config_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("environment config must be a JSON object");
  EnvConfig cfg;
  if (const auto it = doc.find("calibration"); it != doc.end()) {
    CalibrationParams& cal = cfg.calibration;
    read_field(*it, "cpu_base", cal.cpu_base);
    read_field(*it, "cpu_slope", cal.cpu_slope);
    read_field(*it, "lat_base", cal.lat_base);
    read_field(*it, "lat_coeff", cal.lat_coeff);
    read_field(*it, "lat_exp", cal.lat_exp);
    read_field(*it, "overload_alpha", cal.overload_alpha);
    read_field(*it, "slo_p95_ms", cal.slo_p95_ms);
    read_field(*it, "slo_err", cal.slo_err);
    read_field(*it, "cost_per_replica_step", cal.cost_per_replica_step);
    read_field(*it, "mem_base", cal.mem_base);
    read_field(*it, "mem_slope", cal.mem_slope);
  }
  if (const auto it = doc.find("reward"); it != doc.end()) {
    read_field(*it, "c_rep", cfg.reward.c_rep);
    read_field(*it, "lambda", cfg.reward.lambda);
    if (it->contains("r_min")) {
      double v = 0.0;
      read_field(*it, "r_min", v);
      cfg.reward.r_min = v;
    }
    if (it->contains("r_max")) {
      double v = 0.0;
      read_field(*it, "r_max", v);
      cfg.reward.r_max = v;
    }
  }
  if (const auto it = doc.find("trace"); it != doc.end()) cfg.workload = workload_from_json(*it);
  read_field(doc, "episode_steps", cfg.episode_steps);
  read_field(doc, "step_seconds", cfg.step_seconds);
  read_field(doc, "max_replicas", cfg.max_replicas);
  read_field(doc, "min_replicas", cfg.min_replicas);
  read_field(doc, "actuation_delay_steps", cfg.actuation_delay_steps);
  if (const auto it = doc.find("violation_counting"); it != doc.end()) {
    const auto parsed = it->is_string() ? parse_violation_counting(it->get<std::string>()) : std::nullopt;
    if (!parsed) throw ValidationError("violation_counting", "must be PerStep or PerSecond");
    cfg.violation_counting = *parsed;
  }
  cfg.validate();
  return cfg;
}

EnvConfig load_env_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed config file " + path.string() + ": " + e.what());
  }
  return env_config_from_json(doc);
}

std::string config_hash(const EnvConfig& cfg) { return fnv1a_hex(dump_wire(to_json(cfg))); }

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace scalebench
