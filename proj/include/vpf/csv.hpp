#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace vpf::csv {

/// Splits one CSV line on commas. No quoting: none of the schemas need it.
std::vector<std::string_view> split(std::string_view line);

/// Strict double parse; returns false on trailing garbage.
bool parse_double(std::string_view s, double& out);
bool parse_int(std::string_view s, long long& out);

/// Shortest decimal form that round-trips exactly.
std::string format_double(double v);

/// Reads the whole stream as lines, stripping a trailing '\r'.
std::vector<std::string> read_lines(std::istream& in);

}  // namespace vpf::csv
