// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdio>
#include <string>

namespace unncsi::detail {

// Fixed-width significant-digit rendering used in every CSV column.
inline std::string format_double(double v, int digits = 10)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

} // namespace unncsi::detail
