#pragma once

#include <string>

namespace qsync {

/// Shortest representation that round-trips at 9 significant digits.
/// -0 prints as 0 and non-finite values as "nan"/"inf"/"-inf".
std::string format_number(double value);

/// Shortest representation that round-trips the exact double.
std::string format_exact(double value);

}  // namespace qsync
