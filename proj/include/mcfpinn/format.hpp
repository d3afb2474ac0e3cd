#pragma once

#include <cmath>
#include <cstdio>
#include <string>

namespace mcfpinn {

/// 17 significant digits: enough to round-trip any double, so runs compare byte for byte.
inline std::string format_real(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace mcfpinn
