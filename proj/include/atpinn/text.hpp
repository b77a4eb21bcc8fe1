#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace atpinn::text {

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

// Whole-string parse; throws std::invalid_argument on trailing garbage.
double parse_double(std::string_view s);
long long parse_int(std::string_view s);

std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char delim);

}  // namespace atpinn::text
