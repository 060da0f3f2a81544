#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "scalebench/simenv.hpp"

namespace scalebench {

// Environment configuration documents. Keys mirror the EnvConfig field names;
// every key is optional and missing keys keep their defaults. The workload
// lives under "trace" as {"kind": "...", <WorkloadSpec fields>}; when only a
// kind is given, that kind's calibrated defaults fill the rest.

nlohmann::ordered_json to_json(const WorkloadSpec& spec);
WorkloadSpec workload_from_json(const nlohmann::json& doc);

nlohmann::ordered_json to_json(const EnvConfig& cfg);
EnvConfig env_config_from_json(const nlohmann::json& doc);

/// Throws ConfigError when the file is unreadable or malformed and
/// ValidationError when a value is out of range.
EnvConfig load_env_config(const std::filesystem::path& path);

/// 16 hex digits of 64-bit FNV-1a.
std::string fnv1a_hex(std::string_view bytes);

/// fnv1a_hex of the canonical serialization of `cfg`.
std::string config_hash(const EnvConfig& cfg);

}  // namespace scalebench
