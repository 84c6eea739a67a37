#include "geophoto/registry.hpp"

#include "geophoto/csv.hpp"
#include "geophoto/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>

namespace geophoto {

namespace {

std::string lower(std::string_view s)
{
    std::string out(s);
    for (auto& c : out) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

std::int64_t parse_population(std::string text, const std::string& where)
{
    while (!text.empty() && text.back() == ' ') {
        text.pop_back();
    }
    double scale = 1.0;
    const std::string l = lower(text);
    for (std::string_view suffix : {"mln", "m"}) {
        if (l.size() > suffix.size() && l.ends_with(suffix)) {
            text.resize(text.size() - suffix.size());
            scale = 1e6;
            break;
        }
    }
    const double v = csv::parse_double(text, where + " population") * scale;
    if (!(v > 0.0)) {
        throw DataError(where + ": population must be positive");
    }
    return static_cast<std::int64_t>(std::llround(v));
}

void validate(const City& c, const std::string& where)
{
    if (c.city_id.empty()) {
        throw DataError(where + ": empty city_id");
    }
    if (c.country_code.size() != 2 || !std::isupper(static_cast<unsigned char>(c.country_code[0]))
        || !std::isupper(static_cast<unsigned char>(c.country_code[1]))) {
        throw DataError(where + ": invalid country code '" + c.country_code + "'");
    }
    if (c.population <= 0) {
        throw DataError(where + ": population must be positive");
    }
    const auto& b = c.bbox;
    const bool ordered = b.min_lat < b.max_lat && b.min_lon < b.max_lon;
    const bool in_range = b.min_lat >= -90 && b.max_lat <= 90 && b.min_lon >= -180 && b.max_lon <= 180;
    if (!ordered || !in_range) {
        throw DataError(where + ": malformed bbox");
    }
    if (b.max_lat - b.min_lat >= 5.0 || b.max_lon - b.min_lon >= 5.0) {
        throw DataError(where + ": bbox spans 5 degrees or more");
    }
    if (!b.contains(c.centroid)) {
        throw DataError(where + ": bbox does not contain centroid");
    }
}

} // namespace

std::string_view to_string(Continent c)
{
    switch (c) {
    case Continent::africa:
        return "AF";
    case Continent::antarctica:
        return "AN";
    case Continent::asia:
        return "AS";
    case Continent::europe:
        return "EU";
    case Continent::north_america:
        return "NA";
    case Continent::oceania:
        return "OC";
    case Continent::south_america:
        return "SA";
    }
    return "??";
}

std::optional<Continent> parse_continent(std::string_view text)
{
    const std::string l = lower(text);
    if (l == "af" || l == "africa") {
        return Continent::africa;
    }
    if (l == "an" || l == "antarctica") {
        return Continent::antarctica;
    }
    if (l == "as" || l == "asia") {
        return Continent::asia;
    }
    if (l == "eu" || l == "europe") {
        return Continent::europe;
    }
    if (l == "na" || l == "north america" || l == "north_america") {
        return Continent::north_america;
    }
    if (l == "oc" || l == "oceania") {
        return Continent::oceania;
    }
    if (l == "sa" || l == "south america" || l == "south_america") {
        return Continent::south_america;
    }
    return std::nullopt;
}

double great_circle_distance_km(LatLon a, LatLon b)
{
    constexpr double deg = std::numbers::pi / 180.0;
    const double phi1 = a.lat * deg;
    const double phi2 = b.lat * deg;
    const double dphi = (b.lat - a.lat) * deg;
    const double dlambda = (b.lon - a.lon) * deg;
    const double s1 = std::sin(dphi / 2);
    const double s2 = std::sin(dlambda / 2);
    const double h = std::clamp(s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2, 0.0, 1.0);
    return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

CityRegistry CityRegistry::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open registry '" + path.string() + "'");
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError(path.string() + ": missing header");
    }
    if (csv::split(line).size() != 11) {
        throw DataError(path.string() + ":1: registry header must have 11 columns");
    }
    std::vector<City> cities;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        const std::string where = path.filename().string() + ":" + std::to_string(line_no);
        const auto f = csv::split(line);
        if (f.size() != 11) {
            throw DataError(where + ": expected 11 fields, got " + std::to_string(f.size()));
        }
        City c;
        c.city_id = f[0];
        c.name = f[1];
        c.country_code = f[2];
        const auto cont = parse_continent(f[3]);
        if (!cont) {
            throw DataError(where + ": unknown continent '" + f[3] + "'");
        }
        c.continent = *cont;
        c.population = parse_population(f[4], where);
        try {
            c.centroid = {csv::parse_double(f[5], "lat"), csv::parse_double(f[6], "lon")};
            c.bbox = {csv::parse_double(f[7], "min_lat"), csv::parse_double(f[8], "min_lon"),
                      csv::parse_double(f[9], "max_lat"), csv::parse_double(f[10], "max_lon")};
        } catch (const DataError& e) {
            throw DataError(where + ": " + e.what());
        }
        validate(c, where);
        if (std::any_of(cities.begin(), cities.end(), [&](const City& o) { return o.city_id == c.city_id; })) {
            throw DataError(where + ": duplicate city_id '" + c.city_id + "'");
        }
        cities.push_back(std::move(c));
    }
    CityRegistry reg;
    reg.cities_ = std::move(cities);
    reg.index();
    if (reg.cities_.empty()) {
        reg.warnings_.push_back(path.string() + ": registry is empty");
    }
    return reg;
}

CityRegistry CityRegistry::from_cities(std::vector<City> cities)
{
    CityRegistry reg;
    for (std::size_t i = 0; i < cities.size(); ++i) {
        validate(cities[i], "city #" + std::to_string(i));
    }
    reg.cities_ = std::move(cities);
    reg.index();
    return reg;
}

void CityRegistry::index()
{
    std::sort(cities_.begin(), cities_.end(),
              [](const City& a, const City& b) { return a.city_id < b.city_id; });
    by_id_.clear();
    for (std::size_t i = 0; i < cities_.size(); ++i) {
        if (!by_id_.emplace(cities_[i].city_id, i).second) {
            throw DataError("duplicate city_id '" + cities_[i].city_id + "'");
        }
    }
    by_specificity_.resize(cities_.size());
    for (std::size_t i = 0; i < cities_.size(); ++i) {
        by_specificity_[i] = i;
    }
    std::stable_sort(by_specificity_.begin(), by_specificity_.end(), [&](std::size_t a, std::size_t b) {
        return cities_[a].bbox.area_deg2() < cities_[b].bbox.area_deg2();
    });
}

void CityRegistry::load_aliases(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open alias table '" + path.string() + "'");
    }
    std::string line;
    std::getline(in, line);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        const auto f = csv::split(line);
        const std::string where = path.filename().string() + ":" + std::to_string(line_no);
        if (f.size() != 2) {
            throw DataError(where + ": expected location_id,city_id");
        }
        if (!find(f[1])) {
            throw DataError(where + ": alias points at unknown city '" + f[1] + "'");
        }
        add_alias(f[0], f[1]);
    }
}

void CityRegistry::add_alias(std::string location_id, std::string city_id)
{
    aliases_.insert_or_assign(std::move(location_id), std::move(city_id));
}

const City* CityRegistry::find(std::string_view city_id) const
{
    auto it = by_id_.find(city_id);
    return it == by_id_.end() ? nullptr : &cities_[it->second];
}

const City& CityRegistry::at(std::string_view city_id) const
{
    if (const City* c = find(city_id)) {
        return *c;
    }
    throw DataError("unknown city '" + std::string(city_id) + "'");
}

std::optional<std::string> CityRegistry::locate(const PhotoRecord& record) const
{
    if (auto it = aliases_.find(record.location_id); it != aliases_.end()) {
        return it->second;
    }
    return locate_point({record.lat, record.lon});
}

std::optional<std::string> CityRegistry::locate_point(LatLon p) const
{
    // by_specificity_ is ordered by area with city_id order preserved inside ties.
    for (std::size_t i : by_specificity_) {
        if (cities_[i].bbox.contains(p)) {
            return cities_[i].city_id;
        }
    }
    return std::nullopt;
}

RegionScheme RegionScheme::ten_city_default()
{
    RegionScheme s;
    s.focus_cities = {"NYC", "LON", "PAR", "SFO", "WAS", "BCN", "CHI", "LAX", "ROM", "BER"};
    s.buckets = {
        RestBucket{"rest_of_US", {"US"}, {}, 287.61e6},
        RestBucket{"rest_of_EU", {}, {Continent::europe}, 482.61e6},
        RestBucket{"rest_of_world", {}, {}, 5905.14e6},
    };
    return s;
}

RegionMap::RegionMap(const CityRegistry& registry, const RegionScheme& scheme)
{
    for (const auto& id : scheme.focus_cities) {
        const City& c = registry.at(id);
        if (by_city_.contains(id)) {
            throw ConfigError("focus city '" + id + "' listed twice");
        }
        by_city_.emplace(id, regions_.size());
        regions_.push_back(RegionInfo{id, &c, static_cast<double>(c.population)});
    }
    if (!scheme.include_rest) {
        return;
    }
    const std::size_t first_bucket = regions_.size();
    for (const auto& b : scheme.buckets) {
        regions_.push_back(RegionInfo{b.id, nullptr, b.population});
    }
    for (const auto& c : registry.cities()) {
        if (by_city_.contains(c.city_id)) {
            continue;
        }
        for (std::size_t k = 0; k < scheme.buckets.size(); ++k) {
            const auto& b = scheme.buckets[k];
            const bool catch_all = b.countries.empty() && b.continents.empty();
            const bool country = std::find(b.countries.begin(), b.countries.end(), c.country_code) != b.countries.end();
            const bool continent = std::find(b.continents.begin(), b.continents.end(), c.continent) != b.continents.end();
            if (catch_all || country || continent) {
                by_city_.emplace(c.city_id, first_bucket + k);
                break;
            }
        }
    }
}

std::optional<std::size_t> RegionMap::region_of(std::string_view city_id) const
{
    auto it = by_city_.find(city_id);
    if (it == by_city_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::optional<std::size_t> RegionMap::index_of(std::string_view region_id) const
{
    for (std::size_t i = 0; i < regions_.size(); ++i) {
        if (regions_[i].id == region_id) {
            return i;
        }
    }
    return std::nullopt;
}

} // namespace geophoto
