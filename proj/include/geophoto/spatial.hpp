#pragma once

#include "geophoto/homes.hpp"
#include "geophoto/registry.hpp"
#include "geophoto/stats.hpp"

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace geophoto {

/// Density layers. `total` is the sum of the other four.
enum class Layer { resident, domestic, foreign, unknown, total };

inline constexpr std::array<Layer, 5> kAllLayers{Layer::resident, Layer::domestic, Layer::foreign, Layer::unknown,
                                                 Layer::total};
inline constexpr std::array<Layer, 4> kReportLayers{Layer::resident, Layer::domestic, Layer::foreign, Layer::total};

std::string_view to_string(Layer layer);
std::optional<Layer> parse_layer(std::string_view text);
Layer layer_of(ActivityCategory c);

struct Cell {
    int row{0};
    int col{0};

    auto operator<=>(const Cell&) const = default;
};

/// Metric grid anchored at the south-west corner of a city's bbox, using a
/// local equirectangular projection about the anchor.
struct GridSpec {
    std::string city_id;
    double anchor_lat{0.0};
    double anchor_lon{0.0};
    double cell_size_m{500.0};
    int n_rows{1};
    int n_cols{1};

    /// Smallest grid that covers the closed bbox.
    static GridSpec for_city(const City& city, double cell_size_m);

    std::optional<Cell> index(LatLon p) const;
    /// South-west corner of a cell (inverse projection).
    LatLon corner(int row, int col) const;
    std::size_t cell_count() const { return static_cast<std::size_t>(n_rows) * static_cast<std::size_t>(n_cols); }

    bool operator==(const GridSpec&) const = default;
};

class DensityField {
public:
    DensityField() = default;
    explicit DensityField(GridSpec grid);

    const GridSpec& grid() const { return grid_; }
    std::int64_t at(Layer layer, int row, int col) const { return layers_[idx(layer)][offset(row, col)]; }
    std::int64_t at(Layer layer, Cell c) const { return at(layer, c.row, c.col); }
    std::span<const std::int64_t> values(Layer layer) const { return layers_[idx(layer)]; }

    void add(ActivityCategory category, Cell c, std::int64_t n = 1);
    void merge(const DensityField& other);

    std::int64_t total(Layer layer) const;
    /// Positive cell counts of a layer in row-major order.
    std::vector<std::int64_t> nonzero(Layer layer) const;

    std::size_t outside{0}; // points that fell outside the grid

    bool operator==(const DensityField&) const = default;

private:
    static std::size_t idx(Layer l) { return static_cast<std::size_t>(l); }
    std::size_t offset(int row, int col) const
    {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(grid_.n_cols) + static_cast<std::size_t>(col);
    }

    GridSpec grid_;
    std::array<std::vector<std::int64_t>, 5> layers_;
};

struct CategorizedPoint {
    LatLon position;
    ActivityCategory category{ActivityCategory::unknown_home};
};

/// Per-worker partial grids summed in worker order; integer sums make the
/// result independent of the worker count.
DensityField accumulate_density(std::span<const CategorizedPoint> points, const GridSpec& grid, unsigned workers = 1);

enum class LognormalModel { binned, continuous };

/// Truncated log-normal fit of a layer's nonzero cell counts. A layer whose
/// cells all hold the same count comes back unconverged with sigma2 = 0 and a
/// "degenerate" note. Throws InsufficientDataError below 30 nonzero cells and
/// ConvergenceError when the optimizer fails.
stats::FitResult density_distribution_fit(const DensityField& field, Layer layer,
                                          LognormalModel model = LognormalModel::binned);

/// Activity fractions in percent.
inline const std::vector<int> kDecilePercents{10, 20, 30, 40, 50, 60, 70, 80, 90};

/// Smallest number of top cells (counts sorted descending) whose cumulative
/// count reaches percent/100 of the total. Exact integer comparison.
std::size_t cells_for_fraction(std::span<const std::int64_t> sorted_desc, std::int64_t total, int percent);

struct QuintileCurve {
    std::vector<int> percents;
    std::vector<std::size_t> cells;
    std::size_t cells_at_half{0};
    std::vector<double> normalized; // cells / cells_at_half
};

/// Throws DataError when the layer has no activity.
QuintileCurve quintile_area_curve(const DensityField& field, Layer layer,
                                  const std::vector<int>& percents = kDecilePercents);

struct AreaRatios {
    std::optional<double> domestic;
    std::optional<double> foreign;
};

/// Mean over the percents of cells_tourist(q) / cells_resident(q).
std::optional<double> area_ratio(const DensityField& field, Layer numerator, Layer denominator,
                                 const std::vector<int>& percents = kDecilePercents);
AreaRatios tourist_resident_area_ratio(const DensityField& field, const std::vector<int>& percents = kDecilePercents);

struct Hotspot {
    int rank{0};
    std::vector<Cell> cells; // sorted
    std::int64_t activity{0};
    std::int64_t threshold{0};
};

/// Iterative threshold lowering: take the top n cells, let a be the lowest of
/// their counts, select every cell >= a and split into 8-connected components;
/// stop at >= n components, otherwise pull the next n - t cells and repeat.
/// Components come back ranked by activity (ties: smallest cell first). If the
/// nonzero cells run out first, whatever components exist are returned.
/// Throws InsufficientDataError with fewer than n nonzero cells.
std::vector<Hotspot> extract_hotspots(std::span<const std::int64_t> counts, int rows, int cols, std::size_t n);
std::vector<Hotspot> extract_hotspots(const DensityField& field, Layer layer, std::size_t n);

/// Activity of `layer` inside each hotspot.
std::vector<std::int64_t> hotspot_layer_activity(const std::vector<Hotspot>& hotspots, const DensityField& field,
                                                 Layer layer);

/// Sorts activities descending, normalizes by the top one and fits
/// activity = c rank^-q. Zero activities are dropped. Throws
/// InsufficientDataError with fewer than three positive values.
stats::FitResult hotspot_rank_profile(std::vector<double> activities);

double hotspot_coverage_fraction(const std::vector<Hotspot>& hotspots, std::int64_t total_activity);

struct CoveragePoint {
    std::size_t n{0};
    double coverage{0.0};
    std::size_t hotspots{0};
};

/// coverage(n) for n = 1..min(n_max, nonzero cells).
std::vector<CoveragePoint> hotspot_coverage_series(const DensityField& field, Layer layer, std::size_t n_max);

/// GeoJSON FeatureCollection of nonzero cells with per-layer counts.
nlohmann::json density_geojson(const DensityField& field);
/// GeoJSON FeatureCollection, one MultiPolygon per hotspot.
nlohmann::json hotspots_geojson(const std::vector<Hotspot>& hotspots, const GridSpec& grid);

} // namespace geophoto
