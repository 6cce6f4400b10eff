#pragma once

#include <string>
#include <string_view>

namespace hemo {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
/// Parses a full token as a double; throws std::invalid_argument otherwise.
double parse_double(std::string_view s);

}  // namespace hemo
