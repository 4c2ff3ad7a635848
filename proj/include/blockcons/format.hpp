#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace blockcons {

// Shortest decimal form that round-trips; stable across runs, so CSV output
// is byte-reproducible.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace blockcons
