#pragma once

#include "geophoto/ingest.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace geophoto {

enum class Continent { africa, antarctica, asia, europe, north_america, oceania, south_america };

/// Two-letter code: AF, AN, AS, EU, NA, OC, SA.
std::string_view to_string(Continent c);
/// Accepts the two-letter code or the English name, case-insensitive.
std::optional<Continent> parse_continent(std::string_view text);

struct LatLon {
    double lat{0.0};
    double lon{0.0};
};

struct BoundingBox {
    double min_lat{0.0};
    double min_lon{0.0};
    double max_lat{0.0};
    double max_lon{0.0};

    bool contains(LatLon p) const
    {
        return p.lat >= min_lat && p.lat <= max_lat && p.lon >= min_lon && p.lon <= max_lon;
    }
    double area_deg2() const { return (max_lat - min_lat) * (max_lon - min_lon); }
};

struct City {
    std::string city_id;
    std::string name;
    std::string country_code;
    Continent continent{Continent::europe};
    std::int64_t population{0}; // persons
    LatLon centroid;
    BoundingBox bbox;
};

inline constexpr double kEarthRadiusKm = 6371.0;

/// Haversine distance on a sphere of radius kEarthRadiusKm.
double great_circle_distance_km(LatLon a, LatLon b);

/// Immutable after loading; safe to share across threads.
class CityRegistry {
public:
    CityRegistry() = default;

    /// Registry CSV `city_id,name,country_code,continent,population,lat,lon,min_lat,min_lon,max_lat,max_lon`.
    /// Population is in persons, or in millions with an `M`/`mln` suffix.
    static CityRegistry load(const std::filesystem::path& path);
    static CityRegistry from_cities(std::vector<City> cities);

    /// Alias CSV `location_id,city_id`.
    void load_aliases(const std::filesystem::path& path);
    void add_alias(std::string location_id, std::string city_id);

    const City* find(std::string_view city_id) const;
    const City& at(std::string_view city_id) const;
    const std::vector<City>& cities() const { return cities_; }
    std::size_t size() const { return cities_.size(); }
    const std::map<std::string, std::string, std::less<>>& aliases() const { return aliases_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

    /// Alias lookup on location_id first, then point-in-bbox with the
    /// smallest box winning (ties by city_id). nullopt means unassigned.
    std::optional<std::string> locate(const PhotoRecord& record) const;
    std::optional<std::string> locate_point(LatLon p) const;

private:
    void index();

    std::vector<City> cities_; // sorted by city_id
    std::map<std::string, std::size_t, std::less<>> by_id_;
    std::vector<std::size_t> by_specificity_;
    std::map<std::string, std::string, std::less<>> aliases_;
    std::vector<std::string> warnings_;
};

/// One aggregation bucket for cities outside the focus set. A city falls in
/// the first bucket whose country list or continent list matches it; a bucket
/// with both lists empty catches everything.
struct RestBucket {
    std::string id;
    std::vector<std::string> countries;
    std::vector<Continent> continents;
    std::optional<double> population;
};

struct RegionScheme {
    std::vector<std::string> focus_cities;
    std::vector<RestBucket> buckets;
    bool include_rest{true};

    /// Ten focus cities plus rest_of_US / rest_of_EU / rest_of_world, with the
    /// 2008 bucket populations.
    static RegionScheme ten_city_default();
};

struct RegionInfo {
    std::string id;
    const City* city{nullptr}; // null for rest buckets
    std::optional<double> population;

    bool is_city() const { return city != nullptr; }
};

class RegionMap {
public:
    RegionMap(const CityRegistry& registry, const RegionScheme& scheme);

    const std::vector<RegionInfo>& regions() const { return regions_; }
    std::size_t size() const { return regions_.size(); }
    /// nullopt when the city is outside the focus set and rest buckets are off.
    std::optional<std::size_t> region_of(std::string_view city_id) const;
    std::optional<std::size_t> index_of(std::string_view region_id) const;

private:
    std::vector<RegionInfo> regions_;
    std::map<std::string, std::size_t, std::less<>> by_city_;
};

} // namespace geophoto
