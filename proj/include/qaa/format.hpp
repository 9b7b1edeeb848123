#pragma once

#include <cmath>
#include <cstdio>
#include <string>

namespace qaa {

/// Scientific notation with 9 significant digits; the only float format used
/// in CSV artifacts so identical runs give identical bytes.
inline std::string format_sci(double x)
{
    if (std::isnan(x))
        return "nan";
    if (std::isinf(x))
        return x > 0 ? "inf" : "-inf";
    if (x == 0.0)
        x = 0.0; // drop the sign of negative zero
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.8e", x);
    return buf;
}

} // namespace qaa
