#pragma once

#include "geophoto/flows.hpp"
#include "geophoto/homes.hpp"
#include "geophoto/ingest.hpp"
#include "geophoto/registry.hpp"
#include "geophoto/spatial.hpp"

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace geophoto {

/// Flat run configuration. Every key can come from a JSON file and be
/// overridden by the CLI flag of the same name (dashes or underscores).
struct PipelineConfig {
    std::filesystem::path input;
    std::filesystem::path registry;
    std::optional<std::filesystem::path> aliases;
    TimeWindow window{make_instant(2007, 1, 1), make_instant(2010, 1, 1)};
    HomeCriteria home;
    double cell_size_m{500.0};
    std::size_t hotspots{12};
    std::size_t coverage_max{30};
    std::string regions{"top10+rest"};
    std::string cities{"focus"};     // "focus", "all" or a comma list of city ids
    std::string categories{"all"};   // layers reported by the spatial stage
    std::string formats{"csv,json,geojson"};
    bool null_model{true};
    bool distance_decay{true};
    std::string decay_groups{"NA,EU"};
    std::string lognormal_model{"binned"};
    std::filesystem::path out{"out"};
    unsigned workers{1};
    std::uint64_t seed{42};
    bool write_records{false};

    /// Applies one key. Throws ConfigError on unknown keys or bad values.
    void set(std::string key, const nlohmann::json& value);
    void merge_json(const nlohmann::json& j);
    static PipelineConfig load(const std::filesystem::path& path);

    /// Threshold, window and file-existence checks.
    void validate() const;

    RegionScheme region_scheme(const CityRegistry& registry) const;
    std::vector<Layer> layers() const;
    std::set<std::string> format_set() const;
    LognormalModel lognormal() const;
};

enum class Stage { ingest, homes, flows, spatial };

struct CitySpatial {
    std::string city_id;
    DensityField field;
    std::vector<std::pair<Layer, stats::FitResult>> lognormal_fits;
    std::vector<std::pair<Layer, std::string>> lognormal_skips;
    std::vector<std::pair<Layer, QuintileCurve>> quintiles;
    AreaRatios area_ratios;
    std::vector<Hotspot> hotspots; // extracted on the total layer
    std::string hotspot_error;
    std::vector<std::pair<Layer, std::vector<std::int64_t>>> hotspot_activity;
    std::vector<std::pair<Layer, stats::FitResult>> rank_fits;
    std::vector<std::pair<Layer, std::string>> rank_skips;
    std::vector<CoveragePoint> coverage;
};

struct StageTiming {
    std::string stage;
    double seconds{0.0};
};

struct PipelineResult {
    PipelineConfig config;
    Stage reached{Stage::ingest};
    std::unique_ptr<CityRegistry> registry;

    IngestResult ingest;

    std::vector<CityPhoto> photos; // located records, ingest order
    std::size_t unassigned{0};
    std::vector<UserCityActivity> summaries;
    HomeTable homes;
    std::vector<ActivityCategory> categories; // parallel to photos
    LabelConsistency label_consistency;

    std::unique_ptr<RegionMap> regions;
    FlowNetwork network;
    FlowMarginals marginals;
    std::optional<NullModelResult> null_model;
    std::optional<DistanceDecay> decay;
    std::vector<OriginTotals> origins;
    std::optional<stats::FitResult> users_vs_photos;
    std::string users_vs_photos_error;

    std::vector<CitySpatial> spatial;

    std::vector<StageTiming> timings;
    bool numeric_failure{false}; // a fit failed to converge; outputs still written

    /// Deterministic run report: counts and all fit results, no timings.
    nlohmann::json report() const;
};

/// Runs the stages in order up to and including `until`.
PipelineResult run_pipeline(const PipelineConfig& config, Stage until = Stage::spatial);

/// Writes every output the reached stages produced, in the configured formats.
void export_outputs(const PipelineResult& result, const std::filesystem::path& out_dir,
                    const std::set<std::string>& formats);

} // namespace geophoto
