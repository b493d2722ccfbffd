#include "carotid/json_util.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace carotid {

double round9(double value) {
  if (!std::isfinite(value) || value == 0.0) return value;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return std::strtod(buf, nullptr);
}

Json round_numbers(const Json& value) {
  switch (value.type()) {
    case Json::value_t::number_float:
      return round9(value.get<double>());
    case Json::value_t::array: {
      Json out = Json::array();
      for (const auto& v : value) out.push_back(round_numbers(v));
      return out;
    }
    case Json::value_t::object: {
      Json out = Json::object();
      for (auto it = value.begin(); it != value.end(); ++it) out[it.key()] = round_numbers(it.value());
      return out;
    }
    default:
      return value;
  }
}

std::string canonical_dump(const Json& value) { return round_numbers(value).dump(2) + "\n"; }

}  // namespace carotid
