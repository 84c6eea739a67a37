#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace geophoto {

/// UTC instant with one-second resolution, counted from the Unix epoch.
struct Instant {
    std::int64_t seconds{0};

    auto operator<=>(const Instant&) const = default;
};

inline constexpr std::int64_t kSecondsPerDay = 86400;

/// Parses `YYYY-MM-DDTHH:MM:SS[Z]`, `YYYY-MM-DD HH:MM:SS` or a bare `YYYY-MM-DD`.
/// Returns nullopt for anything that is not a real calendar instant
/// (month 0, day 31 in April, hour 24, trailing garbage, ...).
std::optional<Instant> parse_instant(std::string_view text);

/// Formats as `YYYY-MM-DDTHH:MM:SSZ`.
std::string format_instant(Instant t);

Instant make_instant(int year, unsigned month, unsigned day,
                     unsigned hour = 0, unsigned minute = 0, unsigned second = 0);

/// Half-open analysis window [start, end).
struct TimeWindow {
    Instant start;
    Instant end;

    /// Throws ConfigError unless start < end.
    static TimeWindow make(Instant start, Instant end);
    /// Parses `<start>..<end>` where each side is accepted by parse_instant.
    static TimeWindow parse(std::string_view text);

    bool contains(Instant t) const { return start <= t && t < end; }
};

} // namespace geophoto
