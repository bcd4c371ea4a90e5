#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace pcdiff {

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

/// Parses a full field as a double; throws std::invalid_argument otherwise.
double parse_double(std::string_view field);

/// Splits one CSV line on commas. Quoting is not supported.
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace pcdiff
