#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace geophoto::csv {

/// Splits one CSV row. Double-quoted fields may contain commas and "" escapes.
/// A trailing CR is dropped.
std::vector<std::string> split(std::string_view line);

/// Quotes a field only if it needs quoting.
std::string escape(std::string_view field);

/// Shortest round-trip text for a double.
std::string format_double(double v);

/// Fixed-precision text, used for human-facing tables.
std::string format_fixed(double v, int digits);

double parse_double(std::string_view text, std::string_view what);
long long parse_int(std::string_view text, std::string_view what);

} // namespace geophoto::csv
