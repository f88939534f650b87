#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace citytwin {

/// Milliseconds since the Unix epoch, UTC.
using TimestampMs = std::int64_t;

inline constexpr TimestampMs kMinTimestamp = INT64_MIN;
inline constexpr TimestampMs kMaxTimestamp = INT64_MAX;

/// Accepts "YYYY-MM-DDTHH:MM:SS[.fff][Z|+HH:MM|-HH:MM]" ('t', 'z' and a space
/// separator tolerated). Throws Errc::validation.
TimestampMs parse_rfc3339(std::string_view text);

/// Always UTC with a 'Z' suffix; milliseconds only when non-zero.
std::string format_rfc3339(TimestampMs t);

}  // namespace citytwin
