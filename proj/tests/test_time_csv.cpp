#include <doctest.h>

#include "geophoto/csv.hpp"
#include "geophoto/error.hpp"
#include "geophoto/time.hpp"

#include <limits>

using namespace geophoto;

TEST_CASE("instants parse in the accepted layouts")
{
    const auto t = parse_instant("2008-06-01T12:00:00Z");
    REQUIRE(t);
    CHECK(t->seconds == 1212321600);
    CHECK(parse_instant("2008-06-01 12:00:00") == t);
    CHECK(parse_instant("2008-06-01T12:00:00+00:00") == t);
    CHECK(parse_instant("2008-06-01T12:00:00") == t);
    CHECK(parse_instant("2008-06-01")->seconds == 1212278400);
    CHECK(format_instant(*t) == "2008-06-01T12:00:00Z");
    CHECK(make_instant(1970, 1, 1).seconds == 0);
}

TEST_CASE("impossible calendar instants are rejected")
{
    for (const char* bad : {"0000-00-00T00:00:00Z", "2008-13-01T00:00:00Z", "2008-02-30T10:00:00Z",
                            "2009-02-29T00:00:00Z", "2008-06-01T24:00:00Z", "2008-06-01T12:60:00Z",
                            "2008-06-01T12:00:00+02:00", "2008-06-01T12:00:00Zjunk", "not-a-date", "", "2008/06/01"}) {
        CAPTURE(bad);
        CHECK_FALSE(parse_instant(bad));
    }
    CHECK(parse_instant("2008-02-29T00:00:00Z"));
}

TEST_CASE("format and parse round-trip")
{
    for (std::int64_t s : {std::int64_t{0}, std::int64_t{1167609600}, std::int64_t{1262303999}, std::int64_t{951782400}}) {
        CHECK(parse_instant(format_instant(Instant{s}))->seconds == s);
    }
}

TEST_CASE("time windows are half-open and must be ordered")
{
    const auto w = TimeWindow::parse("2007-01-01..2010-01-01");
    CHECK(w.contains(make_instant(2007, 1, 1)));
    CHECK_FALSE(w.contains(make_instant(2006, 12, 31, 23, 59, 59)));
    CHECK(w.contains(make_instant(2009, 12, 31, 23, 59, 59)));
    CHECK_FALSE(w.contains(make_instant(2010, 1, 1)));
    CHECK_THROWS_AS(TimeWindow::parse("2010-01-01..2007-01-01"), ConfigError);
    CHECK_THROWS_AS(TimeWindow::parse("2007-01-01..2007-01-01"), ConfigError);
    CHECK_THROWS_AS(TimeWindow::parse("2007-01-01"), ConfigError);
    CHECK_THROWS_AS(TimeWindow::parse("2007-01-01..soon"), ConfigError);
}

TEST_CASE("csv split handles quoting and line endings")
{
    using V = std::vector<std::string>;
    CHECK(csv::split("a,b,c") == V{"a", "b", "c"});
    CHECK(csv::split("a,,c\r") == V{"a", "", "c"});
    CHECK(csv::split("\"x,y\",\"he said \"\"hi\"\"\",z") == V{"x,y", "he said \"hi\"", "z"});
    CHECK(csv::split("") == V{""});
    CHECK(csv::escape("plain") == "plain");
    CHECK(csv::escape("a,b") == "\"a,b\"");
    CHECK(csv::split(csv::escape("q\"uote,") + ",x") == V{"q\"uote,", "x"});
}

TEST_CASE("csv numbers")
{
    for (double v : {0.1, 1.0 / 3.0, 1e-300, 40.758, -73.9855, 123456789.125}) {
        CHECK(csv::parse_double(csv::format_double(v), "v") == v);
    }
    CHECK(csv::format_fixed(40.7580, 6) == "40.758000");
    CHECK(csv::parse_double(" 2.5 ", "v") == 2.5);
    CHECK_THROWS_AS(csv::parse_double("nan", "v"), DataError);
    CHECK_THROWS_AS(csv::parse_double("inf", "v"), DataError);
    CHECK_THROWS_AS(csv::parse_double("1.5x", "v"), DataError);
    CHECK_THROWS_AS(csv::parse_double("", "v"), DataError);
    CHECK(csv::parse_int("42", "n") == 42);
    CHECK_THROWS_AS(csv::parse_int("4.2", "n"), DataError);
}
