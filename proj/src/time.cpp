#include "geophoto/time.hpp"

#include "geophoto/error.hpp"

#include <chrono>
#include <cstdio>

namespace geophoto {

namespace {

bool read_digits(std::string_view s, std::size_t pos, std::size_t count, unsigned& out)
{
    if (pos + count > s.size()) {
        return false;
    }
    unsigned v = 0;
    for (std::size_t i = pos; i < pos + count; ++i) {
        char c = s[i];
        if (c < '0' || c > '9') {
            return false;
        }
        v = v * 10 + static_cast<unsigned>(c - '0');
    }
    out = v;
    return true;
}

} // namespace

Instant make_instant(int year, unsigned month, unsigned day,
                     unsigned hour, unsigned minute, unsigned second)
{
    using namespace std::chrono;
    const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
    const sys_days d{ymd};
    const auto secs = d.time_since_epoch().count() * kSecondsPerDay
                      + static_cast<std::int64_t>(hour) * 3600
                      + static_cast<std::int64_t>(minute) * 60
                      + static_cast<std::int64_t>(second);
    return Instant{secs};
}

std::optional<Instant> parse_instant(std::string_view s)
{
    while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\t')) {
        s.remove_suffix(1);
    }
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }

    unsigned y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
    if (!read_digits(s, 0, 4, y) || s.size() < 10 || s[4] != '-' || !read_digits(s, 5, 2, mo)
        || s[7] != '-' || !read_digits(s, 8, 2, d)) {
        return std::nullopt;
    }
    if (s.size() > 10) {
        if (s[10] != 'T' && s[10] != ' ') {
            return std::nullopt;
        }
        if (!read_digits(s, 11, 2, h) || s.size() < 19 || s[13] != ':' || !read_digits(s, 14, 2, mi)
            || s[16] != ':' || !read_digits(s, 17, 2, sec)) {
            return std::nullopt;
        }
        std::string_view rest = s.substr(19);
        if (!(rest.empty() || rest == "Z" || rest == "+00:00")) {
            return std::nullopt;
        }
    }

    const std::chrono::year_month_day ymd{std::chrono::year{static_cast<int>(y)},
                                          std::chrono::month{mo}, std::chrono::day{d}};
    if (!ymd.ok() || y == 0 || h > 23 || mi > 59 || sec > 59) {
        return std::nullopt;
    }
    return make_instant(static_cast<int>(y), mo, d, h, mi, sec);
}

std::string format_instant(Instant t)
{
    using namespace std::chrono;
    std::int64_t days = t.seconds / kSecondsPerDay;
    std::int64_t rem = t.seconds % kSecondsPerDay;
    if (rem < 0) {
        rem += kSecondsPerDay;
        --days;
    }
    const year_month_day ymd{sys_days{std::chrono::days{days}}};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ",
                  static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()), static_cast<int>(rem / 3600),
                  static_cast<int>(rem / 60 % 60), static_cast<int>(rem % 60));
    return buf;
}

TimeWindow TimeWindow::make(Instant start, Instant end)
{
    if (!(start < end)) {
        throw ConfigError("time window start " + format_instant(start) + " is not before end "
                          + format_instant(end));
    }
    return TimeWindow{start, end};
}

TimeWindow TimeWindow::parse(std::string_view text)
{
    const auto sep = text.find("..");
    if (sep == std::string_view::npos) {
        throw ConfigError("window must be written as <start>..<end>, got '" + std::string(text) + "'");
    }
    const auto a = parse_instant(text.substr(0, sep));
    const auto b = parse_instant(text.substr(sep + 2));
    if (!a || !b) {
        throw ConfigError("unparseable window bound in '" + std::string(text) + "'");
    }
    return make(*a, *b);
}

} // namespace geophoto
