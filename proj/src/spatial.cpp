#include "geophoto/spatial.hpp"

#include "geophoto/error.hpp"
#include "geophoto/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

#include <nlohmann/json.hpp>

namespace geophoto {

namespace {

constexpr double kEarthRadiusM = kEarthRadiusKm * 1000.0;
constexpr double kDegToRad = std::numbers::pi / 180.0;

} // namespace

std::string_view to_string(Layer layer)
{
    switch (layer) {
    case Layer::resident:
        return "resident";
    case Layer::domestic:
        return "domestic";
    case Layer::foreign:
        return "foreign";
    case Layer::unknown:
        return "unknown";
    case Layer::total:
        return "total";
    }
    return "total";
}

std::optional<Layer> parse_layer(std::string_view text)
{
    for (Layer l : kAllLayers) {
        if (to_string(l) == text) {
            return l;
        }
    }
    return std::nullopt;
}

Layer layer_of(ActivityCategory c)
{
    switch (c) {
    case ActivityCategory::resident:
        return Layer::resident;
    case ActivityCategory::domestic_tourist:
        return Layer::domestic;
    case ActivityCategory::foreign_tourist:
        return Layer::foreign;
    case ActivityCategory::unknown_home:
        return Layer::unknown;
    }
    return Layer::unknown;
}

// ---------------------------------------------------------------------------
// Grid

GridSpec GridSpec::for_city(const City& city, double cell_size_m)
{
    if (!(cell_size_m > 0.0)) {
        throw ConfigError("cell size must be positive");
    }
    GridSpec g;
    g.city_id = city.city_id;
    g.anchor_lat = city.bbox.min_lat;
    g.anchor_lon = city.bbox.min_lon;
    g.cell_size_m = cell_size_m;
    const double height = kEarthRadiusM * (city.bbox.max_lat - city.bbox.min_lat) * kDegToRad;
    const double width =
        kEarthRadiusM * std::cos(g.anchor_lat * kDegToRad) * (city.bbox.max_lon - city.bbox.min_lon) * kDegToRad;
    g.n_rows = static_cast<int>(std::floor(height / cell_size_m)) + 1;
    g.n_cols = static_cast<int>(std::floor(width / cell_size_m)) + 1;
    return g;
}

std::optional<Cell> GridSpec::index(LatLon p) const
{
    const double y = kEarthRadiusM * (p.lat - anchor_lat) * kDegToRad;
    const double x = kEarthRadiusM * std::cos(anchor_lat * kDegToRad) * (p.lon - anchor_lon) * kDegToRad;
    const double row = std::floor(y / cell_size_m);
    const double col = std::floor(x / cell_size_m);
    if (row < 0 || col < 0 || row >= n_rows || col >= n_cols) {
        return std::nullopt;
    }
    return Cell{static_cast<int>(row), static_cast<int>(col)};
}

LatLon GridSpec::corner(int row, int col) const
{
    const double lat = anchor_lat + (row * cell_size_m / kEarthRadiusM) / kDegToRad;
    const double lon = anchor_lon + (col * cell_size_m / (kEarthRadiusM * std::cos(anchor_lat * kDegToRad))) / kDegToRad;
    return {lat, lon};
}

// ---------------------------------------------------------------------------
// Density field

DensityField::DensityField(GridSpec grid) : grid_(std::move(grid))
{
    for (auto& l : layers_) {
        l.assign(grid_.cell_count(), 0);
    }
}

void DensityField::add(ActivityCategory category, Cell c, std::int64_t n)
{
    const auto off = offset(c.row, c.col);
    layers_[idx(layer_of(category))][off] += n;
    layers_[idx(Layer::total)][off] += n;
}

void DensityField::merge(const DensityField& other)
{
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        for (std::size_t i = 0; i < layers_[l].size(); ++i) {
            layers_[l][i] += other.layers_[l][i];
        }
    }
    outside += other.outside;
}

std::int64_t DensityField::total(Layer layer) const
{
    const auto& v = layers_[idx(layer)];
    return std::accumulate(v.begin(), v.end(), std::int64_t{0});
}

std::vector<std::int64_t> DensityField::nonzero(Layer layer) const
{
    std::vector<std::int64_t> out;
    for (auto v : layers_[idx(layer)]) {
        if (v > 0) {
            out.push_back(v);
        }
    }
    return out;
}

DensityField accumulate_density(std::span<const CategorizedPoint> points, const GridSpec& grid, unsigned workers)
{
    const std::size_t shards = std::max(1u, workers);
    std::vector<DensityField> partial(shards, DensityField(grid));
    const std::size_t block = (points.size() + shards - 1) / shards;
    parallel_for(shards, workers, [&](std::size_t s) {
        const std::size_t lo = s * block;
        const std::size_t hi = std::min(points.size(), lo + block);
        for (std::size_t k = lo; k < hi; ++k) {
            if (auto c = grid.index(points[k].position)) {
                partial[s].add(points[k].category, *c);
            } else {
                ++partial[s].outside;
            }
        }
    });
    for (std::size_t s = 1; s < shards; ++s) {
        partial[0].merge(partial[s]);
    }
    return std::move(partial[0]);
}

stats::FitResult density_distribution_fit(const DensityField& field, Layer layer, LognormalModel model)
{
    const auto counts = field.nonzero(layer);
    if (counts.size() < stats::kMinLognormalSamples) {
        throw InsufficientDataError("layer '" + std::string(to_string(layer)) + "' has "
                                    + std::to_string(counts.size()) + " nonzero cells; at least 30 are needed");
    }
    try {
        if (model == LognormalModel::binned) {
            return stats::fit_truncated_lognormal_binned(counts);
        }
        std::vector<double> xs(counts.begin(), counts.end());
        return stats::fit_truncated_lognormal(xs, 1.0);
    } catch (const DegenerateDataError&) {
        stats::FitResult r;
        r.model = model == LognormalModel::binned ? "truncated_lognormal_binned" : "truncated_lognormal";
        r.params = {{"mu", std::log(static_cast<double>(counts.front()))}, {"sigma2", 0.0}};
        r.goodness_kind = stats::Goodness::log_likelihood;
        r.n_points = counts.size();
        r.converged = false;
        r.diagnostics.note = "degenerate: all cells hold the same count";
        return r;
    }
}

// ---------------------------------------------------------------------------
// Quintile curves

std::size_t cells_for_fraction(std::span<const std::int64_t> sorted_desc, std::int64_t total, int percent)
{
    std::int64_t cum = 0;
    const std::int64_t target = static_cast<std::int64_t>(percent) * total;
    for (std::size_t k = 0; k < sorted_desc.size(); ++k) {
        cum += sorted_desc[k];
        if (cum * 100 >= target) {
            return k + 1;
        }
    }
    return sorted_desc.size();
}

namespace {

std::vector<std::int64_t> sorted_desc(const DensityField& field, Layer layer)
{
    auto v = field.nonzero(layer);
    std::sort(v.begin(), v.end(), std::greater<>());
    return v;
}

} // namespace

QuintileCurve quintile_area_curve(const DensityField& field, Layer layer, const std::vector<int>& percents)
{
    const auto sorted = sorted_desc(field, layer);
    const std::int64_t total = std::accumulate(sorted.begin(), sorted.end(), std::int64_t{0});
    if (total <= 0) {
        throw DataError("layer '" + std::string(to_string(layer)) + "' has no activity");
    }
    QuintileCurve c;
    c.percents = percents;
    c.cells_at_half = cells_for_fraction(sorted, total, 50);
    for (int p : percents) {
        const auto k = cells_for_fraction(sorted, total, p);
        c.cells.push_back(k);
        c.normalized.push_back(static_cast<double>(k) / static_cast<double>(c.cells_at_half));
    }
    return c;
}

std::optional<double> area_ratio(const DensityField& field, Layer numerator, Layer denominator,
                                 const std::vector<int>& percents)
{
    const auto num = sorted_desc(field, numerator);
    const auto den = sorted_desc(field, denominator);
    const std::int64_t num_total = std::accumulate(num.begin(), num.end(), std::int64_t{0});
    const std::int64_t den_total = std::accumulate(den.begin(), den.end(), std::int64_t{0});
    if (num_total <= 0 || den_total <= 0 || percents.empty()) {
        return std::nullopt;
    }
    double acc = 0.0;
    for (int p : percents) {
        acc += static_cast<double>(cells_for_fraction(num, num_total, p))
               / static_cast<double>(cells_for_fraction(den, den_total, p));
    }
    return acc / static_cast<double>(percents.size());
}

AreaRatios tourist_resident_area_ratio(const DensityField& field, const std::vector<int>& percents)
{
    return {area_ratio(field, Layer::domestic, Layer::resident, percents),
            area_ratio(field, Layer::foreign, Layer::resident, percents)};
}

// ---------------------------------------------------------------------------
// Hotspots

namespace {

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n), size_(n, 1) { std::iota(parent_.begin(), parent_.end(), 0); }

    std::size_t find(std::size_t x)
    {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    bool unite(std::size_t a, std::size_t b)
    {
        a = find(a);
        b = find(b);
        if (a == b) {
            return false;
        }
        if (size_[a] < size_[b]) {
            std::swap(a, b);
        }
        parent_[b] = a;
        size_[a] += size_[b];
        return true;
    }

private:
    std::vector<std::size_t> parent_;
    std::vector<std::size_t> size_;
};

} // namespace

std::vector<Hotspot> extract_hotspots(std::span<const std::int64_t> counts, int rows, int cols, std::size_t n)
{
    if (n == 0) {
        throw ConfigError("number of hotspots must be positive");
    }
    const std::size_t cells = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    if (counts.size() != cells) {
        throw DataError("count grid does not match its dimensions");
    }
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < cells; ++i) {
        if (counts[i] > 0) {
            order.push_back(i);
        }
    }
    if (order.size() < n) {
        throw InsufficientDataError("need at least " + std::to_string(n) + " nonzero cells, have "
                                    + std::to_string(order.size()));
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });

    DisjointSets sets(cells);
    std::vector<char> selected(cells, 0);
    std::size_t components = 0;
    std::size_t next = 0; // order[0, next) is the selected set
    std::size_t take = n;
    std::int64_t threshold = 0;

    while (true) {
        // Steps 1 / 4: a is the lowest count among the next `take` top cells.
        const std::size_t last = std::min(next + take, order.size()) - 1;
        threshold = counts[order[last]];
        // Step 2: select every cell >= a and merge 8-neighbours.
        while (next < order.size() && counts[order[next]] >= threshold) {
            const std::size_t cell = order[next++];
            selected[cell] = 1;
            ++components;
            const int r = static_cast<int>(cell / static_cast<std::size_t>(cols));
            const int c = static_cast<int>(cell % static_cast<std::size_t>(cols));
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    const int rr = r + dr;
                    const int cc = c + dc;
                    if ((dr == 0 && dc == 0) || rr < 0 || cc < 0 || rr >= rows || cc >= cols) {
                        continue;
                    }
                    const std::size_t nb = static_cast<std::size_t>(rr) * static_cast<std::size_t>(cols)
                                           + static_cast<std::size_t>(cc);
                    if (selected[nb] && sets.unite(cell, nb)) {
                        --components;
                    }
                }
            }
        }
        // Step 3.
        if (components >= n || next >= order.size()) {
            break;
        }
        take = n - components;
    }

    std::map<std::size_t, Hotspot> by_root;
    for (std::size_t k = 0; k < next; ++k) {
        const std::size_t cell = order[k];
        auto& h = by_root[sets.find(cell)];
        h.cells.push_back(Cell{static_cast<int>(cell / static_cast<std::size_t>(cols)),
                               static_cast<int>(cell % static_cast<std::size_t>(cols))});
        h.activity += counts[cell];
    }
    std::vector<Hotspot> out;
    out.reserve(by_root.size());
    for (auto& [root, h] : by_root) {
        std::sort(h.cells.begin(), h.cells.end());
        h.threshold = threshold;
        out.push_back(std::move(h));
    }
    std::sort(out.begin(), out.end(), [](const Hotspot& a, const Hotspot& b) {
        if (a.activity != b.activity) {
            return a.activity > b.activity;
        }
        return a.cells.front() < b.cells.front();
    });
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k].rank = static_cast<int>(k + 1);
    }
    return out;
}

std::vector<Hotspot> extract_hotspots(const DensityField& field, Layer layer, std::size_t n)
{
    return extract_hotspots(field.values(layer), field.grid().n_rows, field.grid().n_cols, n);
}

std::vector<std::int64_t> hotspot_layer_activity(const std::vector<Hotspot>& hotspots, const DensityField& field,
                                                 Layer layer)
{
    std::vector<std::int64_t> out;
    out.reserve(hotspots.size());
    for (const auto& h : hotspots) {
        std::int64_t acc = 0;
        for (const auto& c : h.cells) {
            acc += field.at(layer, c);
        }
        out.push_back(acc);
    }
    return out;
}

stats::FitResult hotspot_rank_profile(std::vector<double> activities)
{
    std::sort(activities.begin(), activities.end(), std::greater<>());
    if (activities.empty() || !(activities.front() > 0.0)) {
        throw InsufficientDataError("rank profile needs positive activity in the top hotspot");
    }
    const double top = activities.front();
    std::vector<double> ranks, ys;
    for (std::size_t k = 0; k < activities.size(); ++k) {
        if (activities[k] > 0.0) {
            ranks.push_back(static_cast<double>(k + 1));
            ys.push_back(activities[k] / top);
        }
    }
    if (ys.size() < 3) {
        throw InsufficientDataError("rank profile needs at least 3 hotspots with positive activity, got "
                                    + std::to_string(ys.size()));
    }
    return stats::fit_power_law(ranks, ys);
}

double hotspot_coverage_fraction(const std::vector<Hotspot>& hotspots, std::int64_t total_activity)
{
    if (total_activity <= 0) {
        return 0.0;
    }
    std::int64_t acc = 0;
    for (const auto& h : hotspots) {
        acc += h.activity;
    }
    return static_cast<double>(acc) / static_cast<double>(total_activity);
}

std::vector<CoveragePoint> hotspot_coverage_series(const DensityField& field, Layer layer, std::size_t n_max)
{
    const std::size_t available = field.nonzero(layer).size();
    const std::int64_t total = field.total(layer);
    std::vector<CoveragePoint> out;
    for (std::size_t n = 1; n <= std::min(n_max, available); ++n) {
        const auto hs = extract_hotspots(field, layer, n);
        out.push_back({n, hotspot_coverage_fraction(hs, total), hs.size()});
    }
    return out;
}

// ---------------------------------------------------------------------------
// GeoJSON

namespace {

// Counter-clockwise exterior ring (right-hand rule), [lon, lat] order.
nlohmann::json cell_ring(const GridSpec& g, Cell c)
{
    const LatLon sw = g.corner(c.row, c.col);
    const LatLon ne = g.corner(c.row + 1, c.col + 1);
    return nlohmann::json::array({nlohmann::json::array({sw.lon, sw.lat}), nlohmann::json::array({ne.lon, sw.lat}),
                                  nlohmann::json::array({ne.lon, ne.lat}), nlohmann::json::array({sw.lon, ne.lat}),
                                  nlohmann::json::array({sw.lon, sw.lat})});
}

} // namespace

nlohmann::json density_geojson(const DensityField& field)
{
    const auto& g = field.grid();
    nlohmann::json features = nlohmann::json::array();
    for (int r = 0; r < g.n_rows; ++r) {
        for (int c = 0; c < g.n_cols; ++c) {
            if (field.at(Layer::total, r, c) == 0) {
                continue;
            }
            nlohmann::json props = {{"row", r}, {"col", c}};
            for (Layer l : kAllLayers) {
                props[std::string(to_string(l))] = field.at(l, r, c);
            }
            features.push_back({{"type", "Feature"},
                                {"geometry", {{"type", "Polygon"}, {"coordinates", nlohmann::json::array({cell_ring(g, {r, c})})}}},
                                {"properties", props}});
        }
    }
    return {{"type", "FeatureCollection"}, {"features", features}};
}

nlohmann::json hotspots_geojson(const std::vector<Hotspot>& hotspots, const GridSpec& grid)
{
    nlohmann::json features = nlohmann::json::array();
    for (const auto& h : hotspots) {
        nlohmann::json polys = nlohmann::json::array();
        for (const auto& c : h.cells) {
            polys.push_back(nlohmann::json::array({cell_ring(grid, c)}));
        }
        features.push_back({{"type", "Feature"},
                            {"geometry", {{"type", "MultiPolygon"}, {"coordinates", polys}}},
                            {"properties", {{"rank", h.rank}, {"activity", h.activity}, {"threshold", h.threshold},
                                            {"cells", h.cells.size()}}}});
    }
    return {{"type", "FeatureCollection"}, {"features", features}};
}

} // namespace geophoto
