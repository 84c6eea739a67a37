#include <doctest.h>

#include "geophoto/error.hpp"
#include "geophoto/registry.hpp"
#include "oracles.hpp"

#include <numbers>
#include <thread>

using namespace geophoto;

namespace {

const std::string kHeader = "city_id,name,country_code,continent,population,lat,lon,min_lat,min_lon,max_lat,max_lon\n";

CityRegistry fixture()
{
    return CityRegistry::load(std::filesystem::path(GEOPHOTO_DATA_DIR) / "registry.csv");
}

City box_city(std::string id, std::string country, Continent cont, double lat0, double lon0, double lat1, double lon1)
{
    City c;
    c.city_id = std::move(id);
    c.name = c.city_id;
    c.country_code = std::move(country);
    c.continent = cont;
    c.population = 1000;
    c.bbox = {lat0, lon0, lat1, lon1};
    c.centroid = {(lat0 + lat1) / 2, (lon0 + lon1) / 2};
    return c;
}

CityRegistry load_text(const std::string& name, const std::string& body)
{
    const auto dir = oracle::scratch("registry_" + name);
    oracle::write_file(dir / "registry.csv", body);
    return CityRegistry::load(dir / "registry.csv");
}

} // namespace

TEST_CASE("bundled registry loads with populations in persons")
{
    const auto reg = fixture();
    CHECK(reg.size() == 20);
    CHECK(reg.warnings().empty());
    const City& nyc = reg.at("NYC");
    CHECK(nyc.country_code == "US");
    CHECK(nyc.continent == Continent::north_america);
    CHECK(nyc.population == 8'360'000);
    CHECK(reg.at("SFO").population == 810'000);
    CHECK(reg.at("BOS").population == 620'000);
    CHECK(reg.find("XXX") == nullptr);
    CHECK_THROWS_AS(reg.at("XXX"), DataError);
}

TEST_CASE("registry validation errors carry row numbers")
{
    const std::string row = "AAA,A,US,NA,1000,10.5,10.5,10,10,11,11\n";
    CHECK_THROWS_WITH_AS(load_text("dup", kHeader + row + row), doctest::Contains("registry.csv:3"), DataError);
    CHECK_THROWS_WITH_AS(load_text("dup2", kHeader + row + row), doctest::Contains("duplicate"), DataError);
    CHECK_THROWS_WITH_AS(load_text("cc", kHeader + "AAA,A,usa,NA,1000,10.5,10.5,10,10,11,11\n"),
                         doctest::Contains("country code"), DataError);
    CHECK_THROWS_WITH_AS(load_text("cc2", kHeader + "AAA,A,us,NA,1000,10.5,10.5,10,10,11,11\n"),
                         doctest::Contains("registry.csv:2"), DataError);
    CHECK_THROWS_AS(load_text("inverted", kHeader + "AAA,A,US,NA,1000,10.5,10.5,11,10,10,11\n"), DataError);
    CHECK_THROWS_AS(load_text("wide", kHeader + "AAA,A,US,NA,1000,10.5,10.5,10,10,15,11\n"), DataError);
    CHECK_THROWS_AS(load_text("centroid", kHeader + "AAA,A,US,NA,1000,12,10.5,10,10,11,11\n"), DataError);
    CHECK_THROWS_AS(load_text("pop", kHeader + "AAA,A,US,NA,0,10.5,10.5,10,10,11,11\n"), DataError);
    CHECK_THROWS_AS(load_text("fields", kHeader + "AAA,A,US,NA,1000,10.5,10.5,10,10,11\n"), DataError);
    CHECK_THROWS_AS(load_text("cont", kHeader + "AAA,A,US,Atlantis,1000,10.5,10.5,10,10,11,11\n"), DataError);
    CHECK(load_text("mln", kHeader + "AAA,A,US,north america,2.5 mln,10.5,10.5,10,10,11,11\n").at("AAA").population
          == 2'500'000);
}

TEST_CASE("header-only registry is empty with a warning")
{
    const auto reg = load_text("empty", kHeader);
    CHECK(reg.size() == 0);
    CHECK(reg.warnings().size() == 1);
}

TEST_CASE("locate_city: alias first, then the most specific bbox")
{
    auto reg = fixture();
    reg.load_aliases(std::filesystem::path(GEOPHOTO_DATA_DIR) / "aliases.csv");
    PhotoRecord r;
    r.location_id = "nyc";
    r.lat = 0;
    r.lon = 0;
    CHECK(reg.locate(r) == "NYC");

    r.location_id = "somewhere";
    r.lat = 41.9028;
    r.lon = 12.4964;
    CHECK(reg.locate(r) == "ROM");

    r.lat = 0;
    r.lon = 0;
    CHECK_FALSE(reg.locate(r));

    const auto dir = oracle::scratch("alias_bad");
    oracle::write_file(dir / "a.csv", "location_id,city_id\nfoo,NOPE\n");
    CHECK_THROWS_AS(reg.load_aliases(dir / "a.csv"), DataError);
}

TEST_CASE("bbox tie-break: smallest area, then city_id")
{
    auto reg = CityRegistry::from_cities({box_city("BIG", "US", Continent::north_america, 10, 10, 12, 12),
                                          box_city("SMALL", "US", Continent::north_america, 10.5, 10.5, 11, 11),
                                          box_city("B_TWIN", "US", Continent::north_america, 10.6, 10.6, 11.1, 11.1),
                                          box_city("A_TWIN", "US", Continent::north_america, 10.6, 10.6, 11.1, 11.1)});
    CHECK(reg.locate_point({10.55, 10.55}) == "SMALL");
    CHECK(reg.locate_point({10.8, 10.8}) == "A_TWIN");
    CHECK(reg.locate_point({11.9, 11.9}) == "BIG");
    // Same answer on every call and thread.
    std::vector<std::optional<std::string>> seen(8);
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < seen.size(); ++t) {
        pool.emplace_back([&, t] { seen[t] = reg.locate_point({10.8, 10.8}); });
    }
    for (auto& th : pool) {
        th.join();
    }
    for (const auto& s : seen) {
        CHECK(s == "A_TWIN");
    }
}

TEST_CASE("great-circle distance")
{
    CHECK(great_circle_distance_km({40.7, -74.0}, {40.7, -74.0}) == 0.0);
    CHECK(great_circle_distance_km({0, 0}, {0, 180}) == doctest::Approx(std::numbers::pi * 6371.0).epsilon(1e-12));
    CHECK(great_circle_distance_km({0, 0}, {0, 180}) == doctest::Approx(20015.1).epsilon(1e-5));

    const double d = great_circle_distance_km({40.7128, -74.0060}, {51.5074, -0.1278});
    CHECK(std::abs(d - 5570.0) <= 5.0);
    CHECK(d == doctest::Approx(oracle::sphere_distance_km(40.7128, -74.0060, 51.5074, -0.1278)).epsilon(1e-9));
}

TEST_CASE("distance properties on random points")
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> lat(-90, 90);
    std::uniform_real_distribution<double> lon(-180, 180);
    for (int i = 0; i < 2000; ++i) {
        const LatLon a{lat(rng), lon(rng)};
        const LatLon b{lat(rng), lon(rng)};
        const LatLon c{lat(rng), lon(rng)};
        const double ab = great_circle_distance_km(a, b);
        CHECK(ab == great_circle_distance_km(b, a));
        CHECK(ab >= 0.0);
        CHECK(ab <= std::numbers::pi * kEarthRadiusKm);
        const double bc = great_circle_distance_km(b, c);
        const double ac = great_circle_distance_km(a, c);
        CHECK(ac <= (ab + bc) * (1 + 1e-9) + 1e-9);
        CHECK(ab == doctest::Approx(oracle::sphere_distance_km(a.lat, a.lon, b.lat, b.lon)).epsilon(1e-9));
    }
}

TEST_CASE("region partition: focus cities plus three rest buckets")
{
    const auto reg = fixture();
    const RegionMap map(reg, RegionScheme::ten_city_default());
    REQUIRE(map.size() == 13);
    CHECK(map.regions()[0].id == "NYC");
    CHECK(map.regions()[10].id == "rest_of_US");
    CHECK(map.regions()[11].id == "rest_of_EU");
    CHECK(map.regions()[12].id == "rest_of_world");
    CHECK(map.region_of("BOS") == 10u);
    CHECK(map.region_of("SEA") == 10u);
    CHECK(map.region_of("MAD") == 11u);
    CHECK(map.region_of("MAN") == 11u);
    CHECK(map.region_of("TYO") == 12u);
    CHECK(map.region_of("YTO") == 12u);
    CHECK(map.regions()[11].population == doctest::Approx(482.61e6));
    for (const auto& c : reg.cities()) {
        CHECK(map.region_of(c.city_id).has_value());
    }
    auto scheme = RegionScheme::ten_city_default();
    scheme.include_rest = false;
    const RegionMap top(reg, scheme);
    CHECK(top.size() == 10);
    CHECK_FALSE(top.region_of("BOS"));
    CHECK(parse_continent("Europe") == Continent::europe);
    CHECK(parse_continent("oc") == Continent::oceania);
    CHECK(to_string(Continent::south_america) == "SA");
}
