#pragma once

#include "geophoto/ingest.hpp"
#include "geophoto/registry.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace geophoto {

/// A photo whose city has been resolved.
struct CityPhoto {
    PhotoRecord record;
    std::string city_id;
};

struct UserCityActivity {
    std::string user_id;
    std::string city_id;
    std::size_t photo_count{0};
    Instant first_at;
    Instant last_at;

    double span_days() const
    {
        return static_cast<double>(last_at.seconds - first_at.seconds) / static_cast<double>(kSecondsPerDay);
    }
};

struct HomeCriteria {
    std::size_t min_photos{10};   // inclusive
    double min_span_days{180.0};  // strict: span must exceed it
};

struct HomeAssignment {
    std::string user_id;
    std::optional<std::string> home_city_id;
    std::optional<std::string> home_country;
    std::optional<UserCityActivity> evidence;

    bool has_home() const { return home_city_id.has_value(); }
};

enum class ActivityCategory { resident, domestic_tourist, foreign_tourist, unknown_home };

std::string_view to_string(ActivityCategory c);

/// One summary per (user, city), sorted by (user_id, city_id).
std::vector<UserCityActivity> summarize_user_city_activity(const std::vector<CityPhoto>& photos);

/// All summaries must belong to the same user. Highest count wins among
/// eligible cities, then longer span, then the smaller city_id.
HomeAssignment infer_home(const std::vector<UserCityActivity>& summaries, const HomeCriteria& criteria = {},
                          const CityRegistry* registry = nullptr);

/// Home table keyed by user_id, covering every user in `summaries`.
class HomeTable {
public:
    const HomeAssignment* find(std::string_view user_id) const;
    const std::map<std::string, HomeAssignment, std::less<>>& assignments() const { return by_user_; }
    std::size_t homed_users() const;
    void insert(HomeAssignment a);

private:
    std::map<std::string, HomeAssignment, std::less<>> by_user_;
};

/// Groups sorted summaries by user and runs infer_home per user on `workers` threads.
HomeTable infer_homes(const std::vector<UserCityActivity>& summaries, const HomeCriteria& criteria,
                      const CityRegistry& registry, unsigned workers = 1);

ActivityCategory categorize_photo(std::string_view photo_city_id, const HomeAssignment* home,
                                  const CityRegistry& registry);

/// Agreement between inferred homes and the dataset's resident-file tags.
/// Users qualify when every resident-labelled photo of theirs falls in a single
/// city and they received an inferred home; a contradiction is a qualifying
/// user whose inferred home differs from that city.
struct LabelConsistency {
    std::size_t users_compared{0};
    std::size_t contradictions{0};

    double contradiction_rate() const
    {
        return users_compared == 0 ? 0.0 : static_cast<double>(contradictions) / static_cast<double>(users_compared);
    }
};

LabelConsistency check_label_consistency(const std::vector<CityPhoto>& photos, const HomeTable& homes);

void write_homes_csv(const std::filesystem::path& path, const HomeTable& homes);

} // namespace geophoto
