#include "geophoto/flows.hpp"

#include "geophoto/csv.hpp"
#include "geophoto/error.hpp"
#include "geophoto/parallel.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace geophoto {

ODMatrix::ODMatrix(std::vector<std::string> regions)
    : regions_(std::move(regions)), counts_(regions_.size() * regions_.size(), 0)
{
}

ODMatrix ODMatrix::scaled(std::int64_t k) const
{
    ODMatrix out = *this;
    for (auto& v : out.counts_) {
        v *= k;
    }
    return out;
}

void ODMatrix::merge(const ODMatrix& other)
{
    for (std::size_t i = 0; i < counts_.size(); ++i) {
        counts_[i] += other.counts_[i];
    }
}

void ActivityTally::add(ActivityCategory c)
{
    switch (c) {
    case ActivityCategory::resident:
        ++resident;
        break;
    case ActivityCategory::domestic_tourist:
        ++domestic;
        break;
    case ActivityCategory::foreign_tourist:
        ++foreign;
        break;
    case ActivityCategory::unknown_home:
        ++unknown;
        break;
    }
}

void ActivityTally::merge(const ActivityTally& o)
{
    resident += o.resident;
    domestic += o.domestic;
    foreign += o.foreign;
    unknown += o.unknown;
}

namespace {

std::vector<std::string> region_ids(const RegionMap& regions)
{
    std::vector<std::string> ids;
    for (const auto& r : regions.regions()) {
        ids.push_back(r.id);
    }
    return ids;
}

} // namespace

FlowNetwork build_flow_network(const std::vector<CityPhoto>& photos, const std::vector<ActivityCategory>& categories,
                               const HomeTable& homes, const RegionMap& regions, unsigned workers)
{
    if (categories.size() != photos.size()) {
        throw DataError("category list does not match photo list");
    }
    const auto ids = region_ids(regions);
    const std::size_t shards = std::max(1u, workers);
    std::vector<FlowNetwork> partial(shards);
    for (auto& p : partial) {
        p.od = ODMatrix(ids);
        p.inbound.resize(ids.size());
        p.outbound.resize(ids.size());
    }
    const std::size_t block = (photos.size() + shards - 1) / shards;
    parallel_for(shards, workers, [&](std::size_t s) {
        auto& net = partial[s];
        const std::size_t lo = s * block;
        const std::size_t hi = std::min(photos.size(), lo + block);
        for (std::size_t k = lo; k < hi; ++k) {
            const auto dest = regions.region_of(photos[k].city_id);
            if (!dest) {
                ++net.unmapped_photos;
                continue;
            }
            net.inbound[*dest].add(categories[k]);
            if (categories[k] == ActivityCategory::unknown_home) {
                continue;
            }
            const HomeAssignment* h = homes.find(photos[k].record.user_id);
            const auto origin = regions.region_of(*h->home_city_id);
            if (!origin) {
                continue;
            }
            ++net.od.at(*origin, *dest);
            net.outbound[*origin].add(categories[k]);
        }
    });
    FlowNetwork out = std::move(partial[0]);
    for (std::size_t s = 1; s < shards; ++s) {
        out.od.merge(partial[s].od);
        for (std::size_t r = 0; r < ids.size(); ++r) {
            out.inbound[r].merge(partial[s].inbound[r]);
            out.outbound[r].merge(partial[s].outbound[r]);
        }
        out.unmapped_photos += partial[s].unmapped_photos;
    }
    return out;
}

ODMatrix build_od_matrix(const std::vector<CityPhoto>& photos, const HomeTable& homes, const RegionMap& regions)
{
    ODMatrix od(region_ids(regions));
    for (const auto& p : photos) {
        const HomeAssignment* h = homes.find(p.record.user_id);
        if (h == nullptr || !h->has_home()) {
            continue;
        }
        const auto origin = regions.region_of(*h->home_city_id);
        const auto dest = regions.region_of(p.city_id);
        if (origin && dest) {
            ++od.at(*origin, *dest);
        }
    }
    return od;
}

FlowMarginals flow_marginals(const ODMatrix& od)
{
    const std::size_t n = od.size();
    FlowMarginals m;
    m.w_in.assign(n, 0);
    m.w_out.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            m.w_out[i] += od.at(i, j);
            m.w_in[j] += od.at(i, j);
        }
    }
    m.w_in_star.resize(n);
    m.w_out_star.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        m.w_in_star[i] = m.w_in[i] - od.at(i, i);
        m.w_out_star[i] = m.w_out[i] - od.at(i, i);
    }
    return m;
}

double per_capita_rate(std::int64_t photos, double population)
{
    if (!(population > 0.0)) {
        throw DataError("population must be positive for a per-capita rate");
    }
    return 1000.0 * static_cast<double>(photos) / population;
}

std::vector<std::optional<double>> per_capita_rates(const FlowMarginals& m, const RegionMap& regions)
{
    std::vector<std::optional<double>> out(regions.size());
    for (std::size_t i = 0; i < regions.size(); ++i) {
        if (const auto& pop = regions.regions()[i].population) {
            out[i] = per_capita_rate(m.w_out[i], *pop);
        }
    }
    return out;
}

PerCapitaAttractiveness relative_attractiveness(const ActivityTally& inbound, double population)
{
    if (!(population > 0.0)) {
        throw DataError("destination population must be positive");
    }
    return {static_cast<double>(inbound.domestic) / population, static_cast<double>(inbound.foreign) / population};
}

namespace {

std::optional<Shares> shares_of(const ActivityTally& t)
{
    const std::int64_t total = t.classified();
    if (total <= 0) {
        return std::nullopt;
    }
    const double d = static_cast<double>(total);
    Shares s;
    s.home = static_cast<double>(t.resident) / d;
    s.domestic = static_cast<double>(t.domestic) / d;
    s.foreign = static_cast<double>(t.foreign) / d;
    return s;
}

} // namespace

CityBreakdown city_activity_breakdown(const ActivityTally& inbound)
{
    return CityBreakdown{shares_of(inbound), inbound.classified(), inbound.unknown};
}

std::optional<Shares> resident_destination_breakdown(const ActivityTally& outbound)
{
    return shares_of(outbound);
}

NullModelResult null_model_matrix(const ODMatrix& od, const FlowMarginals& m)
{
    const std::size_t n = od.size();
    if (n < 2) {
        throw DataError("null model needs at least two regions");
    }
    NullModelResult r;
    r.n = n;
    r.row_defined.assign(n, false);
    r.model.assign(n * n, std::nullopt);
    r.ratio.assign(n * n, std::nullopt);
    std::int64_t total_in_star = 0;
    for (auto v : m.w_in_star) {
        total_in_star += v;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const std::int64_t denom = total_in_star - m.w_in_star[i];
        if (denom <= 0) {
            continue;
        }
        r.row_defined[i] = true;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) {
                continue;
            }
            const double model = static_cast<double>(m.w_out_star[i]) * static_cast<double>(m.w_in_star[j])
                                 / static_cast<double>(denom);
            r.model[i * n + j] = model;
            if (model > 0.0) {
                r.ratio[i * n + j] = static_cast<double>(od.at(i, j)) / model;
            }
        }
    }
    return r;
}

std::vector<DecayPoint> decay_points(const NullModelResult& nm, const RegionMap& regions)
{
    std::vector<DecayPoint> out;
    const auto& info = regions.regions();
    for (std::size_t i = 0; i < nm.n; ++i) {
        for (std::size_t j = 0; j < nm.n; ++j) {
            if (i == j || !info[i].is_city() || !info[j].is_city()) {
                continue;
            }
            const auto ratio = nm.ratio_at(i, j);
            if (!ratio) {
                continue;
            }
            DecayPoint p;
            p.origin = info[i].id;
            p.destination = info[j].id;
            p.origin_group = std::string(to_string(info[i].city->continent));
            p.destination_group = std::string(to_string(info[j].city->continent));
            p.distance_km = great_circle_distance_km(info[i].city->centroid, info[j].city->centroid);
            p.ratio = *ratio;
            out.push_back(std::move(p));
        }
    }
    return out;
}

stats::FitResult fit_distance_decay(const std::vector<DecayPoint>& points)
{
    std::vector<double> xs, ys;
    for (const auto& p : points) {
        if (p.ratio > 0.0) {
            xs.push_back(p.distance_km);
            ys.push_back(p.ratio);
        }
    }
    if (xs.size() < 3) {
        throw InsufficientDataError("distance decay needs at least 3 pairs with positive ratio, got "
                                    + std::to_string(xs.size()));
    }
    return stats::fit_exponential(xs, ys);
}

DistanceDecay distance_decay_analysis(std::vector<DecayPoint> points, const std::string& group_a,
                                      const std::string& group_b)
{
    DistanceDecay out;
    out.points = std::move(points);
    out.residuals.assign(out.points.size(), std::nullopt);
    try {
        out.fit = fit_distance_decay(out.points);
        const double log_a = std::log(out.fit->param("A"));
        const double beta = out.fit->param("beta");
        for (std::size_t k = 0; k < out.points.size(); ++k) {
            if (out.points[k].ratio > 0.0) {
                out.residuals[k] = std::log(out.points[k].ratio) - (log_a - beta * out.points[k].distance_km);
            }
        }
    } catch (const DataError& e) {
        out.fit_error = e.what();
    }

    std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>> groups;
    for (const auto& p : out.points) {
        auto& g = groups[{p.origin_group, p.destination_group}];
        g.first += p.ratio;
        ++g.second;
    }
    for (const auto& [key, acc] : groups) {
        out.group_means.push_back({key.first, key.second, acc.first / static_cast<double>(acc.second), acc.second});
    }

    auto& c = out.comparison;
    c.group_a = group_a;
    c.group_b = group_b;
    if (auto it = groups.find({group_a, group_b}); it != groups.end()) {
        c.mean_a_to_b = it->second.first / static_cast<double>(it->second.second);
        c.n_a_to_b = it->second.second;
    }
    if (auto it = groups.find({group_b, group_a}); it != groups.end()) {
        c.mean_b_to_a = it->second.first / static_cast<double>(it->second.second);
        c.n_b_to_a = it->second.second;
    }
    if (c.mean_a_to_b && c.mean_b_to_a) {
        c.stronger = *c.mean_a_to_b > *c.mean_b_to_a ? "a->b" : (*c.mean_a_to_b < *c.mean_b_to_a ? "b->a" : "equal");
    }
    return out;
}

std::vector<OriginTotals> origin_totals(const std::vector<CityPhoto>& photos, const HomeTable& homes)
{
    std::map<std::string, OriginTotals> acc;
    for (const auto& [user, h] : homes.assignments()) {
        if (h.has_home()) {
            auto& o = acc[*h.home_city_id];
            o.city_id = *h.home_city_id;
            ++o.users;
        }
    }
    for (const auto& p : photos) {
        const HomeAssignment* h = homes.find(p.record.user_id);
        if (h != nullptr && h->has_home()) {
            ++acc[*h->home_city_id].photos;
        }
    }
    std::vector<OriginTotals> out;
    for (auto& [id, o] : acc) {
        out.push_back(std::move(o));
    }
    return out;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write '" + path.string() + "'");
    }
    return out;
}

void write_header(std::ostream& out, const std::vector<std::string>& regions)
{
    out << "origin";
    for (const auto& r : regions) {
        out << ',' << csv::escape(r);
    }
    out << '\n';
}

} // namespace

void write_count_matrix_csv(const std::filesystem::path& path, const ODMatrix& od)
{
    auto out = open_out(path);
    write_header(out, od.regions());
    for (std::size_t i = 0; i < od.size(); ++i) {
        out << csv::escape(od.regions()[i]);
        for (std::size_t j = 0; j < od.size(); ++j) {
            out << ',' << od.at(i, j);
        }
        out << '\n';
    }
}

void write_ratio_matrix_csv(const std::filesystem::path& path, const std::vector<std::string>& regions,
                            const NullModelResult& nm)
{
    auto out = open_out(path);
    write_header(out, regions);
    for (std::size_t i = 0; i < nm.n; ++i) {
        out << csv::escape(regions[i]);
        for (std::size_t j = 0; j < nm.n; ++j) {
            out << ',';
            if (i == j) {
                out << '-';
            } else if (auto r = nm.ratio_at(i, j)) {
                out << csv::format_double(*r);
            } else {
                out << "null";
            }
        }
        out << '\n';
    }
}

RatioTable read_ratio_matrix_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open '" + path.string() + "'");
    }
    RatioTable t;
    std::string line;
    std::getline(in, line);
    auto header = csv::split(line);
    if (header.empty() || header[0] != "origin") {
        throw DataError(path.string() + ": bad matrix header");
    }
    t.regions.assign(header.begin() + 1, header.end());
    const std::size_t n = t.regions.size();
    t.cells.assign(n * n, std::nullopt);
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::getline(in, line)) {
            throw DataError(path.string() + ": missing matrix rows");
        }
        auto f = csv::split(line);
        if (f.size() != n + 1 || f[0] != t.regions[i]) {
            throw DataError(path.string() + ": malformed matrix row " + std::to_string(i + 2));
        }
        for (std::size_t j = 0; j < n; ++j) {
            const auto& cell = f[j + 1];
            if (cell != "-" && cell != "null") {
                t.cells[i * n + j] = csv::parse_double(cell, "ratio");
            }
        }
    }
    return t;
}

} // namespace geophoto
