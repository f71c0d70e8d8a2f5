#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace mci {

/// Shortest decimal that parses back to exactly `value`.
std::string format_double(double value);

/// Whole-token parse; nullopt on trailing garbage or empty input.
std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_integer(std::string_view text);

std::string_view trim(std::string_view text);

}  // namespace mci
