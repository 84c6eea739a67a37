#include <doctest.h>

#include "geophoto/csv.hpp"
#include "geophoto/error.hpp"
#include "geophoto/pipeline.hpp"
#include "geophoto/synth.hpp"
#include "oracles.hpp"

using namespace geophoto;
using nlohmann::json;

namespace {

const CityRegistry& registry()
{
    static const CityRegistry reg = CityRegistry::load(std::filesystem::path(GEOPHOTO_DATA_DIR) / "registry.csv");
    return reg;
}

json small_spec_json(std::uint64_t seed = 7)
{
    return json{{"seed", seed},
                {"cities",
                 {{{"city_id", "NYC"}, {"location_id", "nyc"}, {"users", 60}, {"attractiveness", 2.0}},
                  {{"city_id", "LON"}, {"location_id", "london"}, {"users", 50}, {"attractiveness", 2.0}},
                  {{"city_id", "PAR"}, {"location_id", "paris"}, {"users", 30}},
                  {{"city_id", "CHI"}, {"location_id", "chicago"}, {"users", 30}},
                  {{"city_id", "BOS"}, {"location_id", "boston"}, {"users", 20}, {"aliased", false}}}},
                {"trip_rate", 0.7},
                {"unknown_users", 80},
                {"adversarial_users", 20},
                {"label_contradiction_rate", 0.05}};
}

PipelineConfig config_for(const std::filesystem::path& dir)
{
    PipelineConfig cfg;
    cfg.input = dir / "photos";
    cfg.aliases = dir / "aliases.csv";
    cfg.registry = std::filesystem::path(GEOPHOTO_DATA_DIR) / "registry.csv";
    return cfg;
}

struct Generated {
    std::filesystem::path dir;
    json manifest;
};

const Generated& small_corpus()
{
    static const Generated g = [] {
        Generated out;
        out.dir = oracle::scratch("synth_small");
        out.manifest = synth_generate(SynthSpec::from_json(small_spec_json()), registry(), out.dir);
        return out;
    }();
    return g;
}

} // namespace

TEST_CASE("same seed, same bytes; another seed differs")
{
    const auto spec = SynthSpec::from_json(small_spec_json(11));
    const auto a = oracle::scratch("synth_a");
    const auto b = oracle::scratch("synth_b");
    const auto c = oracle::scratch("synth_c");
    synth_generate(spec, registry(), a);
    synth_generate(spec, registry(), b);
    synth_generate(SynthSpec::from_json(small_spec_json(12)), registry(), c);
    const auto ta = oracle::tree(a);
    CHECK(ta.size() > 5);
    CHECK(ta == oracle::tree(b));
    CHECK(ta.at("manifest.json") != oracle::tree(c).at("manifest.json"));
}

TEST_CASE("manifest counts are consistent")
{
    const auto& m = small_corpus().manifest;
    const auto& k = m.at("counts");
    const auto total = k.at("records_total").get<std::int64_t>();
    const auto dup = k.at("duplicates").get<std::int64_t>();
    CHECK(dup == std::llround(0.0933 * static_cast<double>(total)));
    CHECK(total
          == k.at("clean_records").get<std::int64_t>() + dup + k.at("bad_timestamps").get<std::int64_t>()
                 + k.at("out_of_window").get<std::int64_t>());
    CHECK(k.at("homed_users") == 190);
    CHECK(k.at("unknown_users") == 80);
    CHECK(m.at("homes").size() == 190);
    CHECK(m.at("adversarial_users").size() == 20);

    // BOS is not aliased: its location id must not appear in aliases.csv.
    const auto aliases = oracle::slurp(small_corpus().dir / "aliases.csv");
    CHECK(aliases.find("nyc,NYC") != std::string::npos);
    CHECK(aliases.find("boston") == std::string::npos);
}

TEST_CASE("ingest recovers the planted bookkeeping exactly")
{
    const auto& g = small_corpus();
    const auto r = run_pipeline(config_for(g.dir), Stage::ingest);
    const auto& s = r.ingest.stats;
    const auto& k = g.manifest.at("counts");
    CHECK(s.records_read == k.at("records_total").get<std::size_t>());
    CHECK(s.duplicates_removed == k.at("duplicates").get<std::size_t>());
    CHECK(s.bad_timestamps_removed == k.at("bad_timestamps").get<std::size_t>());
    CHECK(s.out_of_window_removed == k.at("out_of_window").get<std::size_t>());
    CHECK(s.records_kept == k.at("clean_records").get<std::size_t>());
    CHECK(s.invalid_rows_removed == 0);
    CHECK(s.balanced());
}

TEST_CASE("planted homes and per-city truths are recovered")
{
    const auto& g = small_corpus();
    const auto r = run_pipeline(config_for(g.dir), Stage::homes);
    for (const auto& [user, city] : g.manifest.at("homes").items()) {
        const auto* h = r.homes.find(user);
        REQUIRE(h);
        CHECK(h->home_city_id == city.get<std::string>());
    }
    for (const auto& user : g.manifest.at("adversarial_users")) {
        const auto* h = r.homes.find(user.get<std::string>());
        REQUIRE(h);
        CHECK_FALSE(h->has_home());
    }
    CHECK(r.homes.homed_users() == 190);
    CHECK(r.unassigned == 0);

    std::ifstream truth(g.dir / "truth_user_city.csv");
    std::string line;
    std::getline(truth, line);
    std::size_t rows = 0;
    for (const auto& s : r.summaries) {
        REQUIRE(std::getline(truth, line));
        const auto f = csv::split(line);
        CHECK(f[0] == s.user_id);
        CHECK(f[1] == s.city_id);
        CHECK(std::stoul(f[2]) == s.photo_count);
        CHECK(f[3] == format_instant(s.first_at));
        CHECK(f[4] == format_instant(s.last_at));
        ++rows;
    }
    CHECK(rows > 190);
    CHECK_FALSE(std::getline(truth, line));

    const auto n_contra = g.manifest.at("contradiction_users").size();
    CHECK(n_contra > 0);
    CHECK(r.label_consistency.contradictions == n_contra);
}

TEST_CASE("O/D matrix equals the planted flows when every city is a region")
{
    const auto& g = small_corpus();
    auto cfg = config_for(g.dir);
    cfg.regions = "NYC,LON,PAR,CHI,BOS";
    const auto r = run_pipeline(cfg, Stage::flows);
    const auto& planted = g.manifest.at("planted_flows");
    const auto ids = planted.at("cities").get<std::vector<std::string>>();
    REQUIRE(r.network.od.regions() == ids);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        for (std::size_t j = 0; j < ids.size(); ++j) {
            CHECK(r.network.od.at(i, j) == planted.at("matrix")[i][j].get<std::int64_t>());
        }
    }
    REQUIRE(r.users_vs_photos);
    CHECK(r.users_vs_photos->goodness >= 0.95);
}

TEST_CASE("a tight hotspot without background lands in a single cell")
{
    auto j = small_spec_json(3);
    j["cities"][2]["hotspots"] = json::array({{{"lat", 48.8566}, {"lon", 2.3522}, {"weight", 1.0}, {"radius_m", 2.0}}});
    j["background_share"] = {{"resident", 0.0}, {"domestic", 0.0}, {"foreign", 0.0}, {"unknown", 0.0}};
    const auto dir = oracle::scratch("synth_hotspot");
    const auto m = synth_generate(SynthSpec::from_json(j), registry(), dir);
    const auto cell = m.at("hotspots").at("PAR")[0].at("cell");

    auto cfg = config_for(dir);
    cfg.cities = "PAR";
    const auto r = run_pipeline(cfg, Stage::spatial);
    REQUIRE(r.spatial.size() == 1);
    const auto& f = r.spatial[0].field;
    const auto& counts = m.at("city_category_counts").at("PAR");
    std::int64_t planted = 0;
    for (const auto& [k, v] : counts.items()) {
        planted += v.get<std::int64_t>();
    }
    CHECK(f.total(Layer::total) == planted);
    CHECK(f.at(Layer::total, cell[0].get<int>(), cell[1].get<int>()) == planted);
}

TEST_CASE("spec validation")
{
    auto bad = [](const std::function<void(json&)>& edit) {
        auto j = small_spec_json();
        edit(j);
        return SynthSpec::from_json(j);
    };
    CHECK_THROWS_AS(bad([](json& j) { j["cities"][0]["city_id"] = "XXX"; }).validate(registry()), ConfigError);
    CHECK_THROWS_AS(bad([](json& j) { j["cities"][1]["city_id"] = "NYC"; }).validate(registry()), ConfigError);
    CHECK_THROWS_AS(bad([](json& j) { j["duplicate_rate"] = 0.7; }).validate(registry()), ConfigError);
    CHECK_THROWS_AS(bad([](json& j) { j["trip_rate"] = -0.1; }).validate(registry()), ConfigError);
    CHECK_THROWS_AS(bad([](json& j) { j["home_photos"] = {5, 20}; }).validate(registry()), ConfigError);
    CHECK_THROWS_AS(bad([](json& j) { j["home_span_days"] = {150, 400}; }).validate(registry()), ConfigError);
    CHECK_THROWS_AS(bad([](json& j) { j["trip_photos"] = {1, 12}; }).validate(registry()), ConfigError);
    CHECK_THROWS_AS(bad([](json& j) { j["continent_bias"] = {{"NA->Atlantis", 2.0}}; }).validate(registry()),
                    ConfigError);
    CHECK_THROWS_AS(SynthSpec::from_json(json{{"seed", "abc"}}), ConfigError);
    CHECK_NOTHROW(SynthSpec::from_json(small_spec_json()).validate(registry()));
    CHECK_NOTHROW(SynthSpec::load(std::filesystem::path(GEOPHOTO_DATA_DIR) / "synth_default.json").validate(registry()));
}
