#pragma once

#include <charconv>
#include <map>
#include <string>

#include "vpe/errors.hpp"

// "key = value" text helpers shared by run configs and checkpoint metadata.

namespace vpe {

// Lines of "key = value"; blank lines and '#' comments ignored.
std::map<std::string, std::string> parse_kv_text(const std::string& text);

// Shortest decimal form that parses back to the same value.
std::string format_double(double v);
std::string format_float(float v);

double kv_double(const std::map<std::string, std::string>& kv, const std::string& key,
                 double fallback);
long long kv_int(const std::map<std::string, std::string>& kv, const std::string& key,
                 long long fallback);
std::string kv_string(const std::map<std::string, std::string>& kv, const std::string& key,
                      const std::string& fallback);
bool kv_bool(const std::map<std::string, std::string>& kv, const std::string& key, bool fallback);

}  // namespace vpe
