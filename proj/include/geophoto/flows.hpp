#pragma once

#include "geophoto/homes.hpp"
#include "geophoto/registry.hpp"
#include "geophoto/stats.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace geophoto {

/// Photo counts a[i][j]: photos taken in destination j by homed residents of
/// origin i. Loops a[i][i] hold activity at home.
class ODMatrix {
public:
    ODMatrix() = default;
    explicit ODMatrix(std::vector<std::string> regions);

    std::size_t size() const { return regions_.size(); }
    const std::vector<std::string>& regions() const { return regions_; }
    std::int64_t at(std::size_t i, std::size_t j) const { return counts_[i * size() + j]; }
    std::int64_t& at(std::size_t i, std::size_t j) { return counts_[i * size() + j]; }

    ODMatrix scaled(std::int64_t k) const;
    void merge(const ODMatrix& other);

    bool operator==(const ODMatrix&) const = default;

private:
    std::vector<std::string> regions_;
    std::vector<std::int64_t> counts_;
};

/// Photo counts split by activity category.
struct ActivityTally {
    std::int64_t resident{0};
    std::int64_t domestic{0};
    std::int64_t foreign{0};
    std::int64_t unknown{0};

    std::int64_t classified() const { return resident + domestic + foreign; }
    void add(ActivityCategory c);
    void merge(const ActivityTally& o);
};

/// O/D matrix plus the per-region category tallies needed for breakdowns.
/// inbound[j] counts every photo taken in region j (unknown-home included);
/// outbound[i] counts photos by homed residents of i, wherever taken.
struct FlowNetwork {
    ODMatrix od;
    std::vector<ActivityTally> inbound;
    std::vector<ActivityTally> outbound;
    std::size_t unmapped_photos{0}; // city outside every region
};

/// `categories` is parallel to `photos`.
FlowNetwork build_flow_network(const std::vector<CityPhoto>& photos, const std::vector<ActivityCategory>& categories,
                               const HomeTable& homes, const RegionMap& regions, unsigned workers = 1);

ODMatrix build_od_matrix(const std::vector<CityPhoto>& photos, const HomeTable& homes, const RegionMap& regions);

struct FlowMarginals {
    std::vector<std::int64_t> w_in;
    std::vector<std::int64_t> w_out;
    std::vector<std::int64_t> w_in_star;  // w_in minus the loop
    std::vector<std::int64_t> w_out_star; // w_out minus the loop
};

FlowMarginals flow_marginals(const ODMatrix& od);

/// Photos per 1000 residents. Throws DataError on a non-positive population.
double per_capita_rate(std::int64_t photos, double population);

/// rate[i] for every region with a known population.
std::vector<std::optional<double>> per_capita_rates(const FlowMarginals& m, const RegionMap& regions);

struct PerCapitaAttractiveness {
    double domestic{0.0};
    double foreign{0.0};
};

/// Incoming tourist photos split by origin country, divided by the destination population.
PerCapitaAttractiveness relative_attractiveness(const ActivityTally& inbound, double population);

struct Shares {
    double home{0.0}; // resident share
    double domestic{0.0};
    double foreign{0.0};
};

struct CityBreakdown {
    std::optional<Shares> shares; // nullopt when no classified photo exists
    std::int64_t classified{0};
    std::int64_t unknown_home{0};
};

/// Who takes the photos inside a city (Fig. 3b style).
CityBreakdown city_activity_breakdown(const ActivityTally& inbound);

/// Where a city's residents take their photos. For a city region the home
/// share is a[i][i] / w_out[i]. nullopt when the origin has no outflow.
std::optional<Shares> resident_destination_breakdown(const ActivityTally& outbound);

struct NullModelResult {
    std::size_t n{0};
    std::vector<bool> row_defined;
    std::vector<std::optional<double>> model; // n*n, loops always empty
    std::vector<std::optional<double>> ratio; // defined where model > 0

    std::optional<double> model_at(std::size_t i, std::size_t j) const { return model[i * n + j]; }
    std::optional<double> ratio_at(std::size_t i, std::size_t j) const { return ratio[i * n + j]; }
};

/// model(i,j) = w_out*(i) w_in*(j) / sum_{k != i} w_in*(k) for i != j.
NullModelResult null_model_matrix(const ODMatrix& od, const FlowMarginals& m);

struct DecayPoint {
    std::string origin;
    std::string destination;
    std::string origin_group; // continent code of the origin city
    std::string destination_group;
    double distance_km{0.0};
    double ratio{0.0};
};

struct GroupComparison {
    std::string group_a;
    std::string group_b;
    std::optional<double> mean_a_to_b;
    std::optional<double> mean_b_to_a;
    std::size_t n_a_to_b{0};
    std::size_t n_b_to_a{0};
    std::optional<std::string> stronger; // "a->b", "b->a" or "equal"
};

struct GroupMean {
    std::string origin_group;
    std::string destination_group;
    double mean_ratio{0.0};
    std::size_t pairs{0};
};

struct DistanceDecay {
    std::optional<stats::FitResult> fit;
    std::string fit_error;
    std::vector<DecayPoint> points;
    std::vector<std::optional<double>> residuals; // ln ratio - fitted, per point
    std::vector<GroupMean> group_means;
    GroupComparison comparison;
};

/// City-to-city pairs with a defined ratio; rest buckets have no centroid and are skipped.
std::vector<DecayPoint> decay_points(const NullModelResult& null_model, const RegionMap& regions);

/// Fits ln ratio = ln A - beta d over the points with ratio > 0 and compares
/// mean ratios a->b against b->a. Throws InsufficientDataError with fewer than
/// three positive pairs and DegenerateDataError when all distances coincide.
stats::FitResult fit_distance_decay(const std::vector<DecayPoint>& points);

/// Never throws for data shortfalls; the fit error is recorded instead.
DistanceDecay distance_decay_analysis(std::vector<DecayPoint> points, const std::string& group_a,
                                      const std::string& group_b);

struct OriginTotals {
    std::string city_id;
    std::int64_t users{0};
    std::int64_t photos{0};
};

/// Homed users and their worldwide photo counts per home city.
std::vector<OriginTotals> origin_totals(const std::vector<CityPhoto>& photos, const HomeTable& homes);

// Matrix CSV: header `origin,<region ids...>`; loops written as `-`, undefined cells as `null`.
void write_count_matrix_csv(const std::filesystem::path& path, const ODMatrix& od);
void write_ratio_matrix_csv(const std::filesystem::path& path, const std::vector<std::string>& regions,
                            const NullModelResult& nm);

struct RatioTable {
    std::vector<std::string> regions;
    std::vector<std::optional<double>> cells; // n*n
};

RatioTable read_ratio_matrix_csv(const std::filesystem::path& path);

} // namespace geophoto
