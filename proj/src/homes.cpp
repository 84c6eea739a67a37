#include "geophoto/homes.hpp"

#include "geophoto/csv.hpp"
#include "geophoto/error.hpp"
#include "geophoto/parallel.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace geophoto {

std::string_view to_string(ActivityCategory c)
{
    switch (c) {
    case ActivityCategory::resident:
        return "resident";
    case ActivityCategory::domestic_tourist:
        return "domestic_tourist";
    case ActivityCategory::foreign_tourist:
        return "foreign_tourist";
    case ActivityCategory::unknown_home:
        return "unknown_home";
    }
    return "unknown_home";
}

std::vector<UserCityActivity> summarize_user_city_activity(const std::vector<CityPhoto>& photos)
{
    std::map<std::pair<std::string_view, std::string_view>, UserCityActivity> acc;
    for (const auto& p : photos) {
        auto [it, inserted] = acc.try_emplace({p.record.user_id, p.city_id});
        auto& a = it->second;
        if (inserted) {
            a.user_id = p.record.user_id;
            a.city_id = p.city_id;
            a.first_at = p.record.taken_at;
            a.last_at = p.record.taken_at;
        }
        ++a.photo_count;
        a.first_at = std::min(a.first_at, p.record.taken_at);
        a.last_at = std::max(a.last_at, p.record.taken_at);
    }
    std::vector<UserCityActivity> out;
    out.reserve(acc.size());
    for (auto& [key, a] : acc) {
        out.push_back(std::move(a));
    }
    return out;
}

HomeAssignment infer_home(const std::vector<UserCityActivity>& summaries, const HomeCriteria& criteria,
                          const CityRegistry* registry)
{
    HomeAssignment out;
    if (!summaries.empty()) {
        out.user_id = summaries.front().user_id;
    }
    const UserCityActivity* best = nullptr;
    for (const auto& s : summaries) {
        if (s.photo_count < criteria.min_photos || !(s.span_days() > criteria.min_span_days)) {
            continue;
        }
        if (best == nullptr) {
            best = &s;
            continue;
        }
        if (s.photo_count != best->photo_count) {
            if (s.photo_count > best->photo_count) {
                best = &s;
            }
            continue;
        }
        const auto span = s.last_at.seconds - s.first_at.seconds;
        const auto best_span = best->last_at.seconds - best->first_at.seconds;
        if (span > best_span || (span == best_span && s.city_id < best->city_id)) {
            best = &s;
        }
    }
    if (best != nullptr) {
        out.home_city_id = best->city_id;
        out.evidence = *best;
        if (registry != nullptr) {
            if (const City* c = registry->find(best->city_id)) {
                out.home_country = c->country_code;
            }
        }
    }
    return out;
}

const HomeAssignment* HomeTable::find(std::string_view user_id) const
{
    auto it = by_user_.find(user_id);
    return it == by_user_.end() ? nullptr : &it->second;
}

std::size_t HomeTable::homed_users() const
{
    return static_cast<std::size_t>(std::count_if(by_user_.begin(), by_user_.end(),
                                                  [](const auto& kv) { return kv.second.has_home(); }));
}

void HomeTable::insert(HomeAssignment a)
{
    auto key = a.user_id;
    by_user_.insert_or_assign(std::move(key), std::move(a));
}

HomeTable infer_homes(const std::vector<UserCityActivity>& summaries, const HomeCriteria& criteria,
                      const CityRegistry& registry, unsigned workers)
{
    // [begin, end) ranges of consecutive summaries sharing a user.
    std::vector<std::pair<std::size_t, std::size_t>> groups;
    for (std::size_t i = 0; i < summaries.size();) {
        std::size_t j = i + 1;
        while (j < summaries.size() && summaries[j].user_id == summaries[i].user_id) {
            ++j;
        }
        groups.emplace_back(i, j);
        i = j;
    }
    std::vector<HomeAssignment> results(groups.size());
    parallel_for(groups.size(), workers, [&](std::size_t g) {
        const auto [lo, hi] = groups[g];
        std::vector<UserCityActivity> mine(summaries.begin() + static_cast<std::ptrdiff_t>(lo),
                                           summaries.begin() + static_cast<std::ptrdiff_t>(hi));
        results[g] = infer_home(mine, criteria, &registry);
    });
    HomeTable table;
    for (auto& r : results) {
        table.insert(std::move(r));
    }
    return table;
}

ActivityCategory categorize_photo(std::string_view photo_city_id, const HomeAssignment* home,
                                  const CityRegistry& registry)
{
    if (home == nullptr || !home->has_home()) {
        return ActivityCategory::unknown_home;
    }
    if (*home->home_city_id == photo_city_id) {
        return ActivityCategory::resident;
    }
    const City* here = registry.find(photo_city_id);
    if (here != nullptr && home->home_country && *home->home_country == here->country_code) {
        return ActivityCategory::domestic_tourist;
    }
    return ActivityCategory::foreign_tourist;
}

LabelConsistency check_label_consistency(const std::vector<CityPhoto>& photos, const HomeTable& homes)
{
    std::map<std::string_view, std::set<std::string_view>> resident_cities;
    for (const auto& p : photos) {
        if (p.record.source_label == SourceLabel::resident) {
            resident_cities[p.record.user_id].insert(p.city_id);
        }
    }
    LabelConsistency out;
    for (const auto& [user, cities] : resident_cities) {
        if (cities.size() != 1) {
            continue;
        }
        const HomeAssignment* h = homes.find(user);
        if (h == nullptr || !h->has_home()) {
            continue;
        }
        ++out.users_compared;
        if (*h->home_city_id != *cities.begin()) {
            ++out.contradictions;
        }
    }
    return out;
}

void write_homes_csv(const std::filesystem::path& path, const HomeTable& homes)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write '" + path.string() + "'");
    }
    out << "user_id,home_city_id,home_country,photo_count,span_days\n";
    for (const auto& [user, h] : homes.assignments()) {
        out << csv::escape(user) << ',';
        if (h.has_home()) {
            out << csv::escape(*h.home_city_id) << ',' << h.home_country.value_or("") << ','
                << h.evidence->photo_count << ',' << csv::format_fixed(h.evidence->span_days(), 4);
        } else {
            out << ",,,";
        }
        out << '\n';
    }
}

} // namespace geophoto
