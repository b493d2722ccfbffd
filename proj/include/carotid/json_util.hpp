#pragma once

#include <json.hpp>  // vendored nlohmann/json

#include <string>

namespace carotid {

using Json = nlohmann::json;

/// Rounds a double to 9 significant digits so that the shortest round-trip
/// text form nlohmann emits never carries more than 9 digits.
double round9(double value);

/// Deep copy with every floating-point number passed through round9.
Json round_numbers(const Json& value);

/// Sorted keys, 9 significant digits, two-space indent, trailing newline.
std::string canonical_dump(const Json& value);

}  // namespace carotid
