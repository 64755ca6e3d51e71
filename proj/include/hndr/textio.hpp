#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace hndr {

/// Shortest decimal representation that parses back to the identical double.
std::string format_double(double value);

/// Strict decimal parse of the whole token; returns false on trailing garbage.
bool parse_double(std::string_view token, double& out);

std::vector<std::string_view> split(std::string_view line, char sep);

std::string_view trim(std::string_view s);

}  // namespace hndr
