#pragma once

#include "geophoto/registry.hpp"
#include "geophoto/time.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace geophoto {

/// mt19937_64 with hand-rolled derived draws, so a seed yields the same
/// stream on every standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Inclusive integer range.
    std::int64_t integer(std::int64_t lo, std::int64_t hi);
    double normal();
    bool bernoulli(double p) { return uniform() < p; }
    /// Index drawn proportionally to non-negative weights.
    std::size_t weighted(const std::vector<double>& weights);

private:
    std::mt19937_64 engine_;
};

struct SynthHotspot {
    double lat{0.0};
    double lon{0.0};
    double weight{1.0};
    double radius_m{300.0};
};

struct SynthCity {
    std::string city_id;
    std::string location_id;
    std::size_t users{0};           // planted homed users
    bool aliased{true};             // false: located through the bbox fallback
    double attractiveness{1.0};     // scales incoming trip probability
    std::vector<SynthHotspot> hotspots; // generated when empty
};

struct IntRange {
    std::int64_t lo{0};
    std::int64_t hi{0};
};

/// Everything the generator plants. Rates are fractions in [0, 1].
struct SynthSpec {
    std::uint64_t seed{42};
    TimeWindow window{make_instant(2007, 1, 1), make_instant(2010, 1, 1)};
    std::vector<SynthCity> cities;

    IntRange home_photos{12, 40};
    IntRange home_span_days{200, 900};
    double trip_rate{0.35};
    IntRange trip_photos{1, 9};
    IntRange trip_days{1, 10};
    double distance_scale_km{4000.0};
    std::map<std::string, double> continent_bias; // "NA->EU" -> multiplier

    std::size_t unknown_users{1000};
    IntRange unknown_photos{1, 9};
    std::size_t adversarial_users{40};

    double duplicate_rate{0.0933};
    double bad_timestamp_rate{0.0001};
    double out_of_window_rate{0.05};
    double label_contradiction_rate{0.01};
    double missing_photo_id_rate{0.02};

    std::size_t auto_hotspots{15};
    double hotspot_weight_exponent{1.2};
    // Share of photos drawn from the background field rather than hotspots, and
    // the exponent sharpening hotspot weights and the field, per category
    // (resident, domestic, foreign, unknown).
    std::map<std::string, double> background_share{
        {"resident", 0.8}, {"domestic", 0.7}, {"foreign", 0.7}, {"unknown", 0.8}};
    std::map<std::string, double> hotspot_focus{
        {"resident", 1.0}, {"domestic", 1.4}, {"foreign", 1.8}, {"unknown", 1.0}};
    // Background photos land in grid cells drawn from a latent log-normal
    // intensity field with this log-variance, damped by a Gaussian envelope
    // around the city centroid (sd as a fraction of the bbox half-extent).
    // sigma2 = 0 spreads the background uniformly over the bbox.
    double background_field_sigma2{1.5};
    double background_footprint{0.12};
    double grid_cell_size_m{500.0};

    // Home thresholds the planted truths are built against.
    std::size_t min_photos{10};
    double min_span_days{180.0};

    static SynthSpec from_json(const nlohmann::json& j);
    static SynthSpec load(const std::filesystem::path& path);

    /// Throws ConfigError when the spec cannot guarantee its planted truths
    /// (for example a home photo budget below min_photos).
    void validate(const CityRegistry& registry) const;
};

/// Writes `<out>/photos/<location_id>_<label>.csv`, `<out>/aliases.csv` and
/// `<out>/manifest.json`; returns the manifest. Same spec -> same bytes.
nlohmann::json synth_generate(const SynthSpec& spec, const CityRegistry& registry,
                              const std::filesystem::path& out_dir);

} // namespace geophoto
