#pragma once

#include <string>

#include <json.hpp>

namespace scalebench {

/// Compact JSON with every floating-point number printed as %.17g, so that
/// values survive a text round trip bit for bit. Integers print as integers;
/// non-finite floats print as null.
std::string dump_wire(const nlohmann::ordered_json& value);

/// %.17g formatting of a single double.
std::string format_double(double value);

}  // namespace scalebench
