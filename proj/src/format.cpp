#include "qsync/format.hpp"

#include <array>
#include <charconv>
#include <cmath>

namespace qsync {

namespace {

std::string non_finite(double value) {
    if (std::isnan(value)) return "nan";
    return value > 0 ? "inf" : "-inf";
}

}  // namespace

std::string format_number(double value) {
    if (!std::isfinite(value)) return non_finite(value);
    if (value == 0.0) return "0";
    std::array<char, 64> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value,
                             std::chars_format::general, 9);
    std::string s(buf.data(), res.ptr);
    // Reparse and print the 9-digit value in its shortest round-trip form.
    double rounded = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), rounded);
    res = std::to_chars(buf.data(), buf.data() + buf.size(), rounded);
    return std::string(buf.data(), res.ptr);
}

std::string format_exact(double value) {
    if (!std::isfinite(value)) return non_finite(value);
    if (value == 0.0) return "0";
    std::array<char, 64> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), res.ptr);
}

}  // namespace qsync
