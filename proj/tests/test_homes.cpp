#include <doctest.h>

#include "geophoto/homes.hpp"
#include "oracles.hpp"

using namespace geophoto;

namespace {

const CityRegistry& registry()
{
    static const CityRegistry reg = CityRegistry::load(std::filesystem::path(GEOPHOTO_DATA_DIR) / "registry.csv");
    return reg;
}

Instant day(double d) { return Instant{make_instant(2008, 1, 1).seconds + static_cast<std::int64_t>(d * 86400.0)}; }

CityPhoto photo(const std::string& user, const std::string& city, Instant t,
                SourceLabel label = SourceLabel::unknown)
{
    CityPhoto p;
    p.record.photo_id = user + city + std::to_string(t.seconds);
    p.record.user_id = user;
    p.record.taken_at = t;
    p.record.source_label = label;
    p.city_id = city;
    return p;
}

UserCityActivity act(const std::string& city, std::size_t count, double span_days)
{
    UserCityActivity a;
    a.user_id = "u1";
    a.city_id = city;
    a.photo_count = count;
    a.first_at = day(0);
    a.last_at = day(span_days);
    return a;
}

} // namespace

TEST_CASE("summaries aggregate counts and first/last instants")
{
    const auto s = summarize_user_city_activity(
        {photo("u1", "NYC", day(10)), photo("u1", "NYC", day(0)), photo("u1", "NYC", day(400)),
         photo("u2", "PAR", day(5)), photo("u1", "PAR", day(3))});
    REQUIRE(s.size() == 3);
    CHECK(s[0].user_id == "u1");
    CHECK(s[0].city_id == "NYC");
    CHECK(s[0].photo_count == 3);
    CHECK(s[0].span_days() == 400.0);
    CHECK(s[1].city_id == "PAR");
    CHECK(s[1].span_days() == 0.0);
    CHECK(s[2].user_id == "u2");
}

TEST_CASE("infer_home follows the thresholds and tie-breaks")
{
    CHECK(infer_home({act("NYC", 12, 200), act("PAR", 3, 2)}, {}, &registry()).home_city_id == "NYC");
    CHECK_FALSE(infer_home({act("NYC", 9, 400)}).has_home());
    CHECK(infer_home({act("NYC", 12, 181), act("ROM", 12, 300)}).home_city_id == "ROM");
    CHECK_FALSE(infer_home({act("NYC", 50, 180)}).has_home());
    CHECK(infer_home({act("NYC", 10, 180.0001)}).home_city_id == "NYC");
    CHECK(infer_home({act("ROM", 12, 300), act("BER", 12, 300)}).home_city_id == "BER");
    CHECK(infer_home({act("NYC", 30, 190), act("ROM", 12, 900)}).home_city_id == "NYC");
    CHECK_FALSE(infer_home({}).has_home());

    const auto h = infer_home({act("NYC", 12, 200)}, {}, &registry());
    CHECK(h.home_country == "US");
    REQUIRE(h.evidence);
    CHECK(h.evidence->photo_count >= 10);
    CHECK(h.evidence->span_days() > 180.0);

    HomeCriteria strict{20, 365.0};
    CHECK_FALSE(infer_home({act("NYC", 12, 200)}, strict).has_home());
}

TEST_CASE("categorize_photo")
{
    const auto home = infer_home({act("NYC", 12, 200)}, {}, &registry());
    CHECK(categorize_photo("NYC", &home, registry()) == ActivityCategory::resident);
    CHECK(categorize_photo("CHI", &home, registry()) == ActivityCategory::domestic_tourist);
    CHECK(categorize_photo("PAR", &home, registry()) == ActivityCategory::foreign_tourist);
    const HomeAssignment none;
    CHECK(categorize_photo("NYC", &none, registry()) == ActivityCategory::unknown_home);
    CHECK(categorize_photo("NYC", nullptr, registry()) == ActivityCategory::unknown_home);
    for (const auto& c : registry().cities()) {
        if (c.city_id != "NYC") {
            CHECK(categorize_photo(c.city_id, &home, registry()) != ActivityCategory::resident);
        }
    }
}

TEST_CASE("raising thresholds never creates a home")
{
    std::mt19937_64 rng(3);
    const std::vector<std::string> cities{"NYC", "LON", "PAR", "ROM"};
    for (int user = 0; user < 300; ++user) {
        std::vector<UserCityActivity> s;
        for (const auto& c : cities) {
            if (rng() % 2) {
                s.push_back(act(c, 1 + rng() % 25, static_cast<double>(rng() % 500)));
            }
        }
        const bool base = infer_home(s).has_home();
        for (auto [p, d] : {std::pair{10u, 200.0}, {15u, 180.0}, {25u, 400.0}}) {
            if (infer_home(s, {p, d}).has_home()) {
                CHECK(base);
            }
        }
    }
}

TEST_CASE("infer_homes matches per-user inference for any worker count")
{
    std::vector<CityPhoto> photos;
    std::mt19937_64 rng(5);
    for (int u = 0; u < 200; ++u) {
        const auto user = "u" + std::to_string(u);
        for (int k = 0; k < 30; ++k) {
            photos.push_back(photo(user, rng() % 3 ? "NYC" : "LON", day(static_cast<double>(rng() % 600))));
        }
    }
    const auto summaries = summarize_user_city_activity(photos);
    const auto one = infer_homes(summaries, {}, registry(), 1);
    const auto four = infer_homes(summaries, {}, registry(), 4);
    REQUIRE(one.assignments().size() == 200);
    for (const auto& [user, a] : one.assignments()) {
        const auto* b = four.find(user);
        REQUIRE(b);
        CHECK(a.home_city_id == b->home_city_id);
    }
    CHECK(one.homed_users() > 0);
}

TEST_CASE("label consistency compares resident-file users with inferred homes")
{
    std::vector<CityPhoto> photos;
    for (int k = 0; k < 12; ++k) {
        photos.push_back(photo("a", "NYC", day(k * 20), SourceLabel::resident));
        photos.push_back(photo("b", "LON", day(k * 20), SourceLabel::tourist));
        photos.push_back(photo("c", "PAR", day(k * 20), SourceLabel::resident));
    }
    photos.push_back(photo("b", "PAR", day(1), SourceLabel::resident));
    photos.push_back(photo("c", "ROM", day(1), SourceLabel::resident)); // two resident cities: not compared
    photos.push_back(photo("d", "ROM", day(1), SourceLabel::resident)); // no home: not compared
    const auto homes = infer_homes(summarize_user_city_activity(photos), {}, registry());
    const auto lc = check_label_consistency(photos, homes);
    CHECK(lc.users_compared == 2);
    CHECK(lc.contradictions == 1);
    CHECK(lc.contradiction_rate() == 0.5);
}

TEST_CASE("home table CSV lists every user")
{
    std::vector<CityPhoto> photos;
    for (int k = 0; k < 12; ++k) {
        photos.push_back(photo("a", "NYC", day(k * 20)));
    }
    photos.push_back(photo("b", "NYC", day(1)));
    const auto homes = infer_homes(summarize_user_city_activity(photos), {}, registry());
    const auto dir = oracle::scratch("homes_csv");
    write_homes_csv(dir / "homes.csv", homes);
    CHECK(oracle::slurp(dir / "homes.csv")
          == "user_id,home_city_id,home_country,photo_count,span_days\na,NYC,US,12,220.0000\nb,,,,\n");
}
