#include "geophoto/synth.hpp"

#include "geophoto/csv.hpp"
#include "geophoto/error.hpp"
#include "geophoto/ingest.hpp"
#include "geophoto/spatial.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <unordered_set>

namespace geophoto {

std::int64_t Rng::integer(std::int64_t lo, std::int64_t hi)
{
    if (hi <= lo) {
        return lo;
    }
    const auto range = static_cast<std::uint64_t>(hi - lo) + 1;
    if (range == 0) {
        return static_cast<std::int64_t>(engine_());
    }
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t v = engine_();
    while (v >= limit) {
        v = engine_();
    }
    return lo + static_cast<std::int64_t>(v % range);
}

double Rng::normal()
{
    double u1 = uniform();
    while (u1 <= 0.0) {
        u1 = uniform();
    }
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::weighted(const std::vector<double>& weights)
{
    double total = 0.0;
    for (double w : weights) {
        total += w;
    }
    if (!(total > 0.0)) {
        throw ConfigError("weighted draw over zero total weight");
    }
    const double target = uniform() * total;
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) {
            continue;
        }
        acc += weights[i];
        last = i;
        if (target < acc) {
            return i;
        }
    }
    return last;
}

namespace {

const char* const kCategoryNames[] = {"resident", "domestic", "foreign", "unknown"};

IntRange range_from_json(const nlohmann::json& j, IntRange fallback)
{
    if (j.is_array() && j.size() == 2) {
        return {j[0].get<std::int64_t>(), j[1].get<std::int64_t>()};
    }
    if (j.is_number_integer()) {
        const auto v = j.get<std::int64_t>();
        return {v, v};
    }
    if (j.is_null()) {
        return fallback;
    }
    throw ConfigError("expected [lo, hi] range, got " + j.dump());
}

std::map<std::string, double> category_map(const nlohmann::json& j, std::map<std::string, double> defaults)
{
    if (j.is_null()) {
        return defaults;
    }
    for (const auto& [k, v] : j.items()) {
        if (!defaults.contains(k)) {
            throw ConfigError("unknown category '" + k + "'");
        }
        defaults[k] = v.get<double>();
    }
    return defaults;
}

void require_rate(double r, const char* name)
{
    if (!(r >= 0.0 && r <= 1.0)) {
        throw ConfigError(std::string(name) + " must lie in [0, 1]");
    }
}

void require_range(IntRange r, std::int64_t min_lo, const char* name)
{
    if (r.lo < min_lo || r.hi < r.lo) {
        throw ConfigError(std::string(name) + " range is invalid");
    }
}

constexpr double kMetersPerRadian = kEarthRadiusKm * 1000.0;

LatLon offset_m(LatLon p, double dx, double dy)
{
    const double lat = p.lat + dy / kMetersPerRadian * 180.0 / std::numbers::pi;
    const double lon =
        p.lon + dx / (kMetersPerRadian * std::cos(p.lat * std::numbers::pi / 180.0)) * 180.0 / std::numbers::pi;
    return {lat, lon};
}

double round6(double v) { return std::round(v * 1e6) / 1e6; }

enum Cat { kResident = 0, kDomestic = 1, kForeign = 2, kUnknown = 3 };

struct Planted {
    std::string photo_id;
    std::string user_id;
    std::size_t city{0};
    Instant at;
    LatLon pos;
    std::string label;
    Cat cat{kUnknown};
};

std::string row_text(const std::string& photo_id, const std::string& user_id, const std::string& ts, LatLon pos)
{
    std::string row = photo_id + ',' + user_id + ',' + ts + ',' + csv::format_fixed(pos.lat, 6) + ','
                      + csv::format_fixed(pos.lon, 6) + ',';
    if (!photo_id.empty()) {
        row += "https://photos.example.org/" + photo_id + ".jpg";
    }
    return row;
}

class Generator {
public:
    Generator(const SynthSpec& spec, const CityRegistry& registry) : spec_(spec), rng_(spec.seed)
    {
        for (const auto& sc : spec.cities) {
            cities_.push_back(&registry.at(sc.city_id));
            hotspots_.push_back(sc.hotspots);
        }
    }

    nlohmann::json run(const std::filesystem::path& out_dir);

private:
    void make_hotspots();
    void make_background_fields();
    LatLon background_point(std::size_t city, Cat cat);
    LatLon sample_position(std::size_t city, Cat cat);
    void emit(const std::string& user, std::size_t city, Instant at, Cat cat, const std::string& label);
    std::string file_key(std::size_t city, const std::string& label) const
    {
        return spec_.cities[city].location_id + "_" + label;
    }
    std::string next_photo_id() { return "p" + std::to_string(++photo_counter_); }
    std::string next_user_id()
    {
        std::string n = std::to_string(++user_counter_);
        return "u" + std::string(n.size() < 7 ? 7 - n.size() : 0, '0') + n;
    }

    const SynthSpec& spec_;
    Rng rng_;
    std::vector<const City*> cities_;
    std::vector<std::vector<SynthHotspot>> hotspots_;
    std::vector<GridSpec> grids_;
    // Cumulative cell weights per city and category, row-major.
    std::vector<std::array<std::vector<double>, 4>> field_cdf_;
    std::vector<Planted> clean_;
    std::unordered_set<std::string> missing_id_keys_;
    std::size_t missing_ids_{0};
    std::uint64_t photo_counter_{0};
    std::uint64_t user_counter_{0};
};

void Generator::make_hotspots()
{
    for (std::size_t c = 0; c < cities_.size(); ++c) {
        if (!hotspots_[c].empty()) {
            continue;
        }
        const auto& box = cities_[c]->bbox;
        const double dlat = box.max_lat - box.min_lat;
        const double dlon = box.max_lon - box.min_lon;
        for (std::size_t k = 0; k < spec_.auto_hotspots; ++k) {
            SynthHotspot h;
            h.lat = box.min_lat + dlat * rng_.uniform(0.15, 0.85);
            h.lon = box.min_lon + dlon * rng_.uniform(0.15, 0.85);
            h.weight = std::pow(static_cast<double>(k + 1), -spec_.hotspot_weight_exponent);
            h.radius_m = rng_.uniform(150.0, 600.0);
            hotspots_[c].push_back(h);
        }
    }
}

void Generator::make_background_fields()
{
    const double sigma = std::sqrt(spec_.background_field_sigma2);
    for (const City* city : cities_) {
        grids_.push_back(GridSpec::for_city(*city, spec_.grid_cell_size_m));
        auto& cdfs = field_cdf_.emplace_back();
        if (sigma == 0.0) {
            continue;
        }
        const auto& g = grids_.back();
        const double half_rows = 0.5 * g.n_rows;
        const double half_cols = 0.5 * g.n_cols;
        const double sd = spec_.background_footprint;
        std::vector<double> log_w;
        log_w.reserve(g.cell_count());
        for (int r = 0; r < g.n_rows; ++r) {
            for (int c = 0; c < g.n_cols; ++c) {
                const double u = (r + 0.5 - half_rows) / half_rows / sd;
                const double v = (c + 0.5 - half_cols) / half_cols / sd;
                log_w.push_back(sigma * rng_.normal() - 0.5 * (u * u + v * v));
            }
        }
        // Categories sharpen the same field by their hotspot focus exponent.
        for (int cat = 0; cat < 4; ++cat) {
            const double focus = spec_.hotspot_focus.at(kCategoryNames[cat]);
            const double top = *std::max_element(log_w.begin(), log_w.end());
            double acc = 0.0;
            auto& cdf = cdfs[static_cast<std::size_t>(cat)];
            cdf.reserve(log_w.size());
            for (double lw : log_w) {
                acc += std::exp(focus * (lw - top));
                cdf.push_back(acc);
            }
        }
    }
}

LatLon Generator::background_point(std::size_t city, Cat cat)
{
    const auto& box = cities_[city]->bbox;
    const auto& cdf = field_cdf_[city][static_cast<std::size_t>(cat)];
    if (cdf.empty()) {
        return LatLon{rng_.uniform(box.min_lat, box.max_lat), rng_.uniform(box.min_lon, box.max_lon)};
    }
    const double target = rng_.uniform() * cdf.back();
    const auto k = static_cast<int>(std::min<std::size_t>(
        cdf.size() - 1, static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), target) - cdf.begin())));
    const auto& g = grids_[city];
    const LatLon lo = g.corner(k / g.n_cols, k % g.n_cols);
    const LatLon hi = g.corner(k / g.n_cols + 1, k % g.n_cols + 1);
    return LatLon{rng_.uniform(lo.lat, std::min(hi.lat, box.max_lat)), rng_.uniform(lo.lon, std::min(hi.lon, box.max_lon))};
}

LatLon Generator::sample_position(std::size_t city, Cat cat)
{
    const auto& box = cities_[city]->bbox;
    const auto uniform_point = [&] { return background_point(city, cat); };
    LatLon p;
    const auto& spots = hotspots_[city];
    if (spots.empty() || rng_.bernoulli(spec_.background_share.at(kCategoryNames[cat]))) {
        p = uniform_point();
    } else {
        std::vector<double> w;
        w.reserve(spots.size());
        const double focus = spec_.hotspot_focus.at(kCategoryNames[cat]);
        for (const auto& h : spots) {
            w.push_back(std::pow(h.weight, focus));
        }
        const auto& h = spots[rng_.weighted(w)];
        bool inside = false;
        for (int attempt = 0; attempt < 8 && !inside; ++attempt) {
            p = offset_m({h.lat, h.lon}, rng_.normal() * h.radius_m, rng_.normal() * h.radius_m);
            inside = box.contains(p);
        }
        if (!inside) {
            p = uniform_point();
        }
    }
    return {std::clamp(round6(p.lat), box.min_lat, box.max_lat), std::clamp(round6(p.lon), box.min_lon, box.max_lon)};
}

void Generator::emit(const std::string& user, std::size_t city, Instant at, Cat cat, const std::string& label)
{
    Planted p;
    p.user_id = user;
    p.city = city;
    p.at = at;
    p.pos = sample_position(city, cat);
    p.label = label;
    p.cat = cat;
    p.photo_id = next_photo_id();
    if (rng_.bernoulli(spec_.missing_photo_id_rate)) {
        // The content key must stay unique, or dedup would eat a planted record.
        std::string key = row_text("", user, format_instant(at), p.pos);
        if (missing_id_keys_.insert(std::move(key)).second) {
            p.photo_id.clear();
            ++missing_ids_;
        }
    }
    clean_.push_back(std::move(p));
}

nlohmann::json Generator::run(const std::filesystem::path& out_dir)
{
    make_hotspots();
    make_background_fields();
    const std::size_t n_cities = cities_.size();
    const std::int64_t win_start = spec_.window.start.seconds;
    const std::int64_t win_len = spec_.window.end.seconds - win_start;
    const auto min_span_s = static_cast<std::int64_t>(std::llround(spec_.min_span_days * kSecondsPerDay));

    std::vector<std::vector<double>> dest_weights(n_cities, std::vector<double>(n_cities, 0.0));
    for (std::size_t h = 0; h < n_cities; ++h) {
        for (std::size_t d = 0; d < n_cities; ++d) {
            if (h == d) {
                continue;
            }
            const double km = great_circle_distance_km(cities_[h]->centroid, cities_[d]->centroid);
            double w = spec_.cities[d].attractiveness * std::exp(-km / spec_.distance_scale_km);
            const std::string pair =
                std::string(to_string(cities_[h]->continent)) + "->" + std::string(to_string(cities_[d]->continent));
            if (auto it = spec_.continent_bias.find(pair); it != spec_.continent_bias.end()) {
                w *= it->second;
            }
            dest_weights[h][d] = w;
        }
    }

    nlohmann::json homes = nlohmann::json::object();
    std::vector<std::string> contradiction_users;
    std::vector<std::string> adversarial_users;

    for (std::size_t h = 0; h < n_cities; ++h) {
        for (std::size_t u = 0; u < spec_.cities[h].users; ++u) {
            const std::string user = next_user_id();
            homes[user] = cities_[h]->city_id;
            const bool contradiction = rng_.bernoulli(spec_.label_contradiction_rate) && n_cities > 1;
            if (contradiction) {
                contradiction_users.push_back(user);
            }

            const auto n_home = rng_.integer(spec_.home_photos.lo, spec_.home_photos.hi);
            const std::int64_t span = rng_.integer(spec_.home_span_days.lo, spec_.home_span_days.hi) * kSecondsPerDay
                                      + rng_.integer(0, kSecondsPerDay - 1);
            const std::int64_t t0 = win_start + rng_.integer(0, win_len - span - 1);
            const std::string home_label = contradiction ? "tourist" : "resident";
            for (std::int64_t k = 0; k < n_home; ++k) {
                std::int64_t t = k == 0 ? t0 : k == 1 ? t0 + span : t0 + rng_.integer(0, span);
                emit(user, h, Instant{t}, kResident, home_label);
            }

            int trips = 0;
            while (trips < 20 && rng_.bernoulli(spec_.trip_rate)) {
                ++trips;
            }
            if (contradiction && trips == 0) {
                trips = 1;
            }
            std::vector<std::int64_t> used(n_cities, 0);
            for (int t = 0; t < trips; ++t) {
                const std::size_t d = rng_.weighted(dest_weights[h]);
                const std::int64_t allowed = static_cast<std::int64_t>(spec_.min_photos) - 1 - used[d];
                const std::int64_t n = std::min(rng_.integer(spec_.trip_photos.lo, spec_.trip_photos.hi), allowed);
                const std::int64_t trip_len = rng_.integer(spec_.trip_days.lo, spec_.trip_days.hi) * kSecondsPerDay;
                const std::int64_t trip_start = win_start + rng_.integer(0, win_len - trip_len - 1);
                const Cat cat = cities_[d]->country_code == cities_[h]->country_code ? kDomestic : kForeign;
                const std::string label = contradiction && t == 0 ? "resident" : "tourist";
                for (std::int64_t k = 0; k < n; ++k) {
                    emit(user, d, Instant{trip_start + rng_.integer(0, trip_len - 1)}, cat, label);
                }
                used[d] += std::max<std::int64_t>(n, 0);
            }
        }
    }

    std::vector<double> attractiveness;
    for (const auto& sc : spec_.cities) {
        attractiveness.push_back(sc.attractiveness);
    }
    for (std::size_t u = 0; u < spec_.unknown_users; ++u) {
        const std::string user = next_user_id();
        const std::size_t c = rng_.weighted(attractiveness);
        const auto n = rng_.integer(spec_.unknown_photos.lo, spec_.unknown_photos.hi);
        for (std::int64_t k = 0; k < n; ++k) {
            emit(user, c, Instant{win_start + rng_.integer(0, win_len - 1)}, kUnknown, "unknown");
        }
    }

    // Near-threshold users: one photo short of the count, or a span of exactly
    // the minimum (which the strict comparison rejects).
    for (std::size_t u = 0; u < spec_.adversarial_users; ++u) {
        const std::string user = next_user_id();
        adversarial_users.push_back(user);
        const std::size_t c = u % n_cities;
        std::int64_t n = 0;
        std::int64_t span = 0;
        if (u % 2 == 0) {
            n = static_cast<std::int64_t>(spec_.min_photos) - 1;
            span = std::min<std::int64_t>(2 * min_span_s, win_len - 2);
        } else {
            n = static_cast<std::int64_t>(spec_.min_photos) + 2;
            span = min_span_s;
        }
        const std::int64_t t0 = win_start + rng_.integer(0, win_len - span - 1);
        for (std::int64_t k = 0; k < n; ++k) {
            const std::int64_t t = k == 0 ? t0 : k == 1 ? t0 + span : t0 + rng_.integer(0, span);
            emit(user, c, Instant{t}, kUnknown, "resident");
        }
    }

    // Rows per output file, keyed by "<location>_<label>".
    std::map<std::string, std::vector<std::string>> files;
    std::vector<std::pair<std::string, std::string>> clean_rows; // (file key, row)
    clean_rows.reserve(clean_.size());
    for (const auto& p : clean_) {
        clean_rows.emplace_back(file_key(p.city, p.label), row_text(p.photo_id, p.user_id, format_instant(p.at), p.pos));
    }
    for (const auto& [key, row] : clean_rows) {
        files[key].push_back(row);
    }

    const auto clean_count = static_cast<std::int64_t>(clean_.size());
    const std::int64_t kEarliest = kEarliestValidInstant.seconds;
    const std::int64_t out_of_window = std::llround(spec_.out_of_window_rate * static_cast<double>(clean_count));
    const std::int64_t pre_room = win_start - kEarliest - 1;
    for (std::int64_t k = 0; k < out_of_window && clean_count > 0; ++k) {
        const auto& src = clean_[static_cast<std::size_t>(rng_.integer(0, clean_count - 1))];
        std::int64_t t = 0;
        if (pre_room >= 1 && rng_.bernoulli(0.5)) {
            t = win_start - rng_.integer(1, std::min<std::int64_t>(pre_room, 3 * 365 * kSecondsPerDay));
        } else {
            t = spec_.window.end.seconds + rng_.integer(0, 365 * kSecondsPerDay);
        }
        files[file_key(src.city, src.label)].push_back(
            row_text(next_photo_id(), src.user_id, format_instant(Instant{t}), src.pos));
    }

    static const char* const kBadStamps[] = {"0000-00-00T00:00:00Z", "1970-01-01T00:00:00Z", "2008-13-01T10:00:00Z",
                                             "2008-02-30T10:00:00Z", "1989-12-31T23:59:59Z", "not-a-date"};
    const std::int64_t bad = std::llround(spec_.bad_timestamp_rate * static_cast<double>(clean_count));
    for (std::int64_t k = 0; k < bad && clean_count > 0; ++k) {
        const auto& src = clean_[static_cast<std::size_t>(rng_.integer(0, clean_count - 1))];
        files[file_key(src.city, src.label)].push_back(
            row_text(next_photo_id(), src.user_id, kBadStamps[rng_.integer(0, 5)], src.pos));
    }

    // Pick D with D = round(r * (base + D)) so the removed share of all rows
    // read is the configured rate.
    const std::int64_t base = clean_count + out_of_window + bad;
    const double r = spec_.duplicate_rate;
    std::int64_t dups = std::llround(r * static_cast<double>(base) / (1.0 - r));
    for (int it = 0; it < 16; ++it) {
        const std::int64_t next = std::llround(r * static_cast<double>(base + dups));
        if (next == dups) {
            break;
        }
        dups = next;
    }
    if (clean_count == 0) {
        dups = 0;
    }
    std::vector<std::string> duplicate_keys;
    duplicate_keys.reserve(static_cast<std::size_t>(dups));
    for (std::int64_t k = 0; k < dups; ++k) {
        const auto idx = static_cast<std::size_t>(rng_.integer(0, clean_count - 1));
        files[clean_rows[idx].first].push_back(clean_rows[idx].second);
        const auto& p = clean_[idx];
        duplicate_keys.push_back(p.photo_id.empty()
                                     ? p.user_id + "|" + format_instant(p.at) + "|" + csv::format_fixed(p.pos.lat, 6)
                                           + "|" + csv::format_fixed(p.pos.lon, 6)
                                     : p.photo_id);
    }

    std::filesystem::create_directories(out_dir / "photos");
    std::int64_t records_total = 0;
    nlohmann::json file_list = nlohmann::json::array();
    for (auto& [key, rows] : files) {
        for (std::size_t i = rows.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(rng_.integer(0, static_cast<std::int64_t>(i) - 1));
            std::swap(rows[i - 1], rows[j]);
        }
        const auto path = out_dir / "photos" / (key + ".csv");
        std::ofstream out(path, std::ios::binary);
        if (!out) {
            throw ConfigError("cannot write " + path.string());
        }
        out << "photo_id,user_id,taken_at,lat,lon,url\n";
        for (const auto& row : rows) {
            out << row << '\n';
        }
        records_total += static_cast<std::int64_t>(rows.size());
        file_list.push_back("photos/" + key + ".csv");
    }

    {
        std::ofstream out(out_dir / "aliases.csv", std::ios::binary);
        out << "location_id,city_id\n";
        std::map<std::string, std::string> aliases;
        for (const auto& sc : spec_.cities) {
            if (sc.aliased) {
                aliases[sc.location_id] = sc.city_id;
            }
        }
        for (const auto& [loc, city] : aliases) {
            out << csv::escape(loc) << ',' << csv::escape(city) << '\n';
        }
    }

    // Ground truth per (user, city) over planted clean records.
    struct Agg {
        std::int64_t count{0};
        Instant first{INT64_MAX};
        Instant last{INT64_MIN};
    };
    std::map<std::pair<std::string, std::string>, Agg> per_user_city;
    std::vector<std::vector<std::int64_t>> flows(n_cities, std::vector<std::int64_t>(n_cities, 0));
    std::vector<std::array<std::int64_t, 4>> cat_counts(n_cities, {0, 0, 0, 0});
    std::map<std::string, std::size_t> city_index;
    for (std::size_t c = 0; c < n_cities; ++c) {
        city_index[cities_[c]->city_id] = c;
    }
    for (const auto& p : clean_) {
        auto& a = per_user_city[{p.user_id, cities_[p.city]->city_id}];
        ++a.count;
        a.first = std::min(a.first, p.at);
        a.last = std::max(a.last, p.at);
        ++cat_counts[p.city][p.cat];
        if (auto it = homes.find(p.user_id); it != homes.end()) {
            ++flows[city_index.at(it->get<std::string>())][p.city];
        }
    }
    {
        std::ofstream out(out_dir / "truth_user_city.csv", std::ios::binary);
        out << "user_id,city_id,photo_count,first_at,last_at\n";
        for (const auto& [key, a] : per_user_city) {
            out << key.first << ',' << key.second << ',' << a.count << ',' << format_instant(a.first) << ','
                << format_instant(a.last) << '\n';
        }
    }

    nlohmann::json m;
    m["seed"] = spec_.seed;
    m["window"] = {{"start", format_instant(spec_.window.start)}, {"end", format_instant(spec_.window.end)}};
    m["counts"] = {{"records_total", records_total},
                   {"clean_records", clean_count},
                   {"duplicates", dups},
                   {"bad_timestamps", bad},
                   {"out_of_window", out_of_window},
                   {"missing_photo_id", missing_ids_},
                   {"homed_users", homes.size()},
                   {"unknown_users", spec_.unknown_users},
                   {"adversarial_users", adversarial_users.size()}};
    m["duplicate_rate"] = spec_.duplicate_rate;
    m["homes"] = homes;
    m["adversarial_users"] = adversarial_users;
    m["contradiction_users"] = contradiction_users;
    nlohmann::json city_ids = nlohmann::json::array();
    for (const auto* c : cities_) {
        city_ids.push_back(c->city_id);
    }
    m["planted_flows"] = {{"cities", city_ids}, {"matrix", flows}};
    nlohmann::json per_city = nlohmann::json::object();
    nlohmann::json hotspot_json = nlohmann::json::object();
    for (std::size_t c = 0; c < n_cities; ++c) {
        per_city[cities_[c]->city_id] = {{"resident", cat_counts[c][kResident]},
                                         {"domestic", cat_counts[c][kDomestic]},
                                         {"foreign", cat_counts[c][kForeign]},
                                         {"unknown", cat_counts[c][kUnknown]}};
        const GridSpec grid = GridSpec::for_city(*cities_[c], spec_.grid_cell_size_m);
        nlohmann::json list = nlohmann::json::array();
        for (const auto& h : hotspots_[c]) {
            nlohmann::json e = {{"lat", h.lat}, {"lon", h.lon}, {"weight", h.weight}, {"radius_m", h.radius_m}};
            if (auto cell = grid.index({h.lat, h.lon})) {
                e["cell"] = {cell->row, cell->col};
            }
            list.push_back(std::move(e));
        }
        hotspot_json[cities_[c]->city_id] = std::move(list);
    }
    m["city_category_counts"] = per_city;
    m["hotspots"] = hotspot_json;
    m["duplicates"] = duplicate_keys;
    m["files"] = file_list;
    m["user_city_truth"] = "truth_user_city.csv";

    std::ofstream out(out_dir / "manifest.json", std::ios::binary);
    out << m.dump(2) << '\n';
    return m;
}

} // namespace

SynthSpec SynthSpec::from_json(const nlohmann::json& j)
{
    SynthSpec s;
    try {
        s.seed = j.value("seed", s.seed);
        if (j.contains("window")) {
            s.window = TimeWindow::parse(j.at("window").get<std::string>());
        } else if (j.contains("window_start") || j.contains("window_end")) {
            const auto a = parse_instant(j.value("window_start", format_instant(s.window.start)));
            const auto b = parse_instant(j.value("window_end", format_instant(s.window.end)));
            if (!a || !b) {
                throw ConfigError("unparseable synth window");
            }
            s.window = TimeWindow::make(*a, *b);
        }
        for (const auto& c : j.value("cities", nlohmann::json::array())) {
            SynthCity city;
            city.city_id = c.at("city_id").get<std::string>();
            city.location_id = c.value("location_id", std::string{});
            if (city.location_id.empty()) {
                for (char ch : city.city_id) {
                    city.location_id += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
                }
            }
            city.users = c.value("users", std::size_t{0});
            city.aliased = c.value("aliased", true);
            city.attractiveness = c.value("attractiveness", 1.0);
            for (const auto& h : c.value("hotspots", nlohmann::json::array())) {
                city.hotspots.push_back(
                    {h.at("lat").get<double>(), h.at("lon").get<double>(), h.value("weight", 1.0),
                     h.value("radius_m", 300.0)});
            }
            s.cities.push_back(std::move(city));
        }
        s.home_photos = range_from_json(j.value("home_photos", nlohmann::json()), s.home_photos);
        s.home_span_days = range_from_json(j.value("home_span_days", nlohmann::json()), s.home_span_days);
        s.trip_rate = j.value("trip_rate", s.trip_rate);
        s.trip_photos = range_from_json(j.value("trip_photos", nlohmann::json()), s.trip_photos);
        s.trip_days = range_from_json(j.value("trip_days", nlohmann::json()), s.trip_days);
        s.distance_scale_km = j.value("distance_scale_km", s.distance_scale_km);
        if (j.contains("continent_bias")) {
            s.continent_bias = j.at("continent_bias").get<std::map<std::string, double>>();
        }
        s.unknown_users = j.value("unknown_users", s.unknown_users);
        s.unknown_photos = range_from_json(j.value("unknown_photos", nlohmann::json()), s.unknown_photos);
        s.adversarial_users = j.value("adversarial_users", s.adversarial_users);
        s.duplicate_rate = j.value("duplicate_rate", s.duplicate_rate);
        s.bad_timestamp_rate = j.value("bad_timestamp_rate", s.bad_timestamp_rate);
        s.out_of_window_rate = j.value("out_of_window_rate", s.out_of_window_rate);
        s.label_contradiction_rate = j.value("label_contradiction_rate", s.label_contradiction_rate);
        s.missing_photo_id_rate = j.value("missing_photo_id_rate", s.missing_photo_id_rate);
        s.auto_hotspots = j.value("auto_hotspots", s.auto_hotspots);
        s.hotspot_weight_exponent = j.value("hotspot_weight_exponent", s.hotspot_weight_exponent);
        s.background_share = category_map(j.value("background_share", nlohmann::json()), s.background_share);
        s.hotspot_focus = category_map(j.value("hotspot_focus", nlohmann::json()), s.hotspot_focus);
        s.background_field_sigma2 = j.value("background_field_sigma2", s.background_field_sigma2);
        s.background_footprint = j.value("background_footprint", s.background_footprint);
        s.grid_cell_size_m = j.value("grid_cell_size_m", s.grid_cell_size_m);
        s.min_photos = j.value("min_photos", s.min_photos);
        s.min_span_days = j.value("min_span_days", s.min_span_days);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("synth spec: ") + e.what());
    }
    return s;
}

SynthSpec SynthSpec::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open synth spec " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return from_json(j);
}

void SynthSpec::validate(const CityRegistry& registry) const
{
    if (cities.empty()) {
        throw ConfigError("synth spec lists no cities");
    }
    std::set<std::string> ids;
    std::set<std::string> locations;
    for (const auto& c : cities) {
        if (!registry.find(c.city_id)) {
            throw ConfigError("synth city '" + c.city_id + "' is not in the registry");
        }
        if (!ids.insert(c.city_id).second || !locations.insert(c.location_id).second) {
            throw ConfigError("synth city or location listed twice: " + c.city_id);
        }
        if (c.location_id.empty() || c.location_id.find_first_of("/\\,") != std::string::npos) {
            throw ConfigError("invalid location_id for " + c.city_id);
        }
        if (!(c.attractiveness > 0.0)) {
            throw ConfigError("attractiveness must be positive for " + c.city_id);
        }
        for (const auto& h : c.hotspots) {
            if (!(h.weight > 0.0) || !(h.radius_m > 0.0)) {
                throw ConfigError("hotspot weight and radius must be positive for " + c.city_id);
            }
        }
    }
    for (double r : {duplicate_rate, bad_timestamp_rate, out_of_window_rate, label_contradiction_rate,
                     missing_photo_id_rate, trip_rate}) {
        require_rate(r, "rate");
    }
    if (duplicate_rate >= 0.5) {
        throw ConfigError("duplicate_rate must stay below 0.5");
    }
    for (const auto& m : {background_share, hotspot_focus}) {
        for (const auto& [k, v] : m) {
            if (!(v >= 0.0)) {
                throw ConfigError("negative value for category " + k);
            }
        }
    }
    for (const auto& [k, v] : background_share) {
        require_rate(v, "background_share");
    }
    if (!(background_field_sigma2 >= 0.0) || !(background_footprint > 0.0) || !(grid_cell_size_m > 0.0)) {
        throw ConfigError("background field parameters must be positive");
    }
    if (min_photos < 2 || !(min_span_days > 0.0)) {
        throw ConfigError("home thresholds must be positive");
    }
    require_range(home_photos, static_cast<std::int64_t>(min_photos), "home_photos (needs lo >= min_photos)");
    require_range(home_span_days, 0, "home_span_days");
    if (!(static_cast<double>(home_span_days.lo) > min_span_days)) {
        throw ConfigError("home_span_days must start above min_span_days");
    }
    require_range(trip_photos, 1, "trip_photos");
    require_range(unknown_photos, 1, "unknown_photos");
    require_range(trip_days, 1, "trip_days");
    if (trip_photos.hi >= static_cast<std::int64_t>(min_photos)
        || unknown_photos.hi >= static_cast<std::int64_t>(min_photos)) {
        throw ConfigError("trip_photos and unknown_photos must stay below min_photos");
    }
    const std::int64_t window_days = (window.end.seconds - window.start.seconds) / kSecondsPerDay;
    if (home_span_days.hi + 1 >= window_days || trip_days.hi >= window_days
        || static_cast<std::int64_t>(2 * min_span_days) + 1 >= window_days) {
        throw ConfigError("analysis window too short for the planted spans");
    }
    if (trip_rate > 0.0 && cities.size() < 2) {
        throw ConfigError("trips need at least two cities");
    }
    if (!(distance_scale_km > 0.0) || !(grid_cell_size_m > 0.0)) {
        throw ConfigError("distance_scale_km and grid_cell_size_m must be positive");
    }
    for (const auto& [pair, w] : continent_bias) {
        const auto arrow = pair.find("->");
        if (arrow == std::string::npos || !parse_continent(pair.substr(0, arrow))
            || !parse_continent(pair.substr(arrow + 2)) || !(w > 0.0)) {
            throw ConfigError("bad continent_bias entry '" + pair + "'");
        }
    }
}

nlohmann::json synth_generate(const SynthSpec& spec, const CityRegistry& registry,
                              const std::filesystem::path& out_dir)
{
    spec.validate(registry);
    SynthSpec normalized = spec;
    // Bias keys may use names; canonicalize to codes.
    normalized.continent_bias.clear();
    for (const auto& [pair, w] : spec.continent_bias) {
        const auto arrow = pair.find("->");
        normalized.continent_bias[std::string(to_string(*parse_continent(pair.substr(0, arrow)))) + "->"
                                  + std::string(to_string(*parse_continent(pair.substr(arrow + 2))))] = w;
    }
    Generator gen(normalized, registry);
    return gen.run(out_dir);
}

} // namespace geophoto
