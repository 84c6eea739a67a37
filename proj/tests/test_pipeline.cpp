#include <doctest.h>

#include "geophoto/error.hpp"
#include "geophoto/pipeline.hpp"
#include "geophoto/synth.hpp"
#include "oracles.hpp"

#include <cstdlib>
#include <sys/wait.h>

using namespace geophoto;
using nlohmann::json;

namespace {

const std::filesystem::path& corpus()
{
    static const std::filesystem::path dir = [] {
        const auto d = oracle::scratch("pipeline_corpus");
        const auto reg = CityRegistry::load(std::filesystem::path(GEOPHOTO_DATA_DIR) / "registry.csv");
        const json spec{{"seed", 5},
                        {"cities",
                         {{{"city_id", "NYC"}, {"location_id", "nyc"}, {"users", 120}},
                          {{"city_id", "LON"}, {"location_id", "london"}, {"users", 100}},
                          {{"city_id", "PAR"}, {"location_id", "paris"}, {"users", 60}},
                          {{"city_id", "SFO"}, {"location_id", "san_francisco"}, {"users", 60}},
                          {{"city_id", "MAD"}, {"location_id", "madrid"}, {"users", 40}, {"aliased", false}}}},
                        {"trip_rate", 0.8},
                        {"unknown_users", 200}};
        synth_generate(SynthSpec::from_json(spec), reg, d);
        return d;
    }();
    return dir;
}

PipelineConfig base_config()
{
    PipelineConfig cfg;
    cfg.input = corpus() / "photos";
    cfg.aliases = corpus() / "aliases.csv";
    cfg.registry = std::filesystem::path(GEOPHOTO_DATA_DIR) / "registry.csv";
    return cfg;
}

std::size_t line_count(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

int cli(const std::string& args)
{
    const std::string cmd = std::string("\"") + GEOPHOTO_CLI + "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST_CASE("config keys accept dashes and reject unknown names")
{
    PipelineConfig cfg;
    cfg.set("min-photos", 12);
    cfg.set("min_span_days", 200.5);
    cfg.set("cell-size", 250);
    cfg.set("window", "2008-01-01..2009-01-01");
    cfg.set("null-model", false);
    CHECK(cfg.home.min_photos == 12);
    CHECK(cfg.home.min_span_days == 200.5);
    CHECK(cfg.cell_size_m == 250.0);
    CHECK(cfg.window.start == make_instant(2008, 1, 1));
    CHECK_FALSE(cfg.null_model);
    CHECK_THROWS_AS(cfg.set("colour", "red"), ConfigError);
    CHECK_THROWS_AS(cfg.set("min_photos", "many"), ConfigError);
    CHECK_THROWS_AS(cfg.set("window", "2009-01-01..2008-01-01"), ConfigError);
    CHECK_THROWS_AS(cfg.merge_json(json::array()), ConfigError);
}

TEST_CASE("config files resolve relative paths against their own directory")
{
    const auto dir = oracle::scratch("pipeline_config");
    oracle::write_file(dir / "cfg.json", R"({"input": "photos", "aliases": "aliases.csv", "hotspots": 5})");
    const auto cfg = PipelineConfig::load(dir / "cfg.json");
    CHECK(cfg.input == dir / "photos");
    CHECK(cfg.aliases == dir / "aliases.csv");
    CHECK(cfg.hotspots == 5);

    oracle::write_file(dir / "broken.json", "{not json");
    CHECK_THROWS_AS(PipelineConfig::load(dir / "broken.json"), ConfigError);
    CHECK_THROWS_AS(PipelineConfig::load(dir / "missing.json"), ConfigError);
}

TEST_CASE("config validation")
{
    CHECK_NOTHROW(base_config().validate());
    auto c = base_config();
    c.workers = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = base_config();
    c.input = corpus() / "nope";
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = base_config();
    c.categories = "residents,aliens";
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = base_config();
    c.decay_groups = "NA";
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = base_config();
    c.regions = "NYC,XXX";
    CHECK_THROWS_AS(run_pipeline(c, Stage::flows), Error);
}

TEST_CASE("end-to-end run reconciles and exports readable outputs")
{
    auto cfg = base_config();
    cfg.cities = "NYC,LON";
    const auto r = run_pipeline(cfg);
    CHECK(r.reached == Stage::spatial);
    CHECK(r.ingest.stats.balanced());
    CHECK(r.photos.size() + r.unassigned == r.ingest.stats.records_kept);
    CHECK(r.categories.size() == r.photos.size());
    REQUIRE(r.regions);
    CHECK(r.regions->size() == 13);

    std::int64_t od_total = 0;
    for (auto v : r.marginals.w_out) {
        od_total += v;
    }
    std::int64_t homed_photos = 0;
    for (auto c : r.categories) {
        homed_photos += c != ActivityCategory::unknown_home;
    }
    CHECK(od_total == homed_photos);

    const auto report = r.report();
    CHECK(report.at("homes").at("reconciles") == true);
    CHECK(report.at("flows").at("reconciles") == true);
    CHECK_FALSE(report.dump().find("seconds") != std::string::npos);

    const auto out = oracle::scratch("pipeline_export");
    export_outputs(r, out, cfg.format_set());
    const auto files = oracle::tree(out);
    for (const char* f : {"report.json", "ingest_stats.json", "homes.csv", "flows/od_matrix.csv", "flows/edges.csv",
                          "flows/null_model_ratio.csv", "spatial/NYC/density.csv", "spatial/NYC/hotspots.geojson",
                          "spatial/LON/density.geojson", "spatial/coverage_summary.csv"}) {
        CAPTURE(f);
        CHECK(files.count(f) == 1);
    }
    const std::size_t n = r.regions->size();
    CHECK(line_count(files.at("flows/edges.csv")) == 1 + n * n - n);

    const auto table = read_ratio_matrix_csv(out / "flows/null_model_ratio.csv");
    REQUIRE(r.null_model);
    REQUIRE(table.cells.size() == n * n);
    for (std::size_t k = 0; k < n * n; ++k) {
        CHECK(table.cells[k] == r.null_model->ratio[k]);
    }

    const auto gj = json::parse(files.at("spatial/NYC/hotspots.geojson"));
    CHECK(gj.at("features").size() == r.spatial[0].hotspots.size());
    for (const auto& feat : gj.at("features")) {
        for (const auto& poly : feat.at("geometry").at("coordinates")) {
            CHECK(poly.at(0).front() == poly.at(0).back());
        }
    }
    CHECK(json::parse(files.at("ingest_stats.json")).at("records_kept") == r.ingest.stats.records_kept);
}

TEST_CASE("output trees are byte-identical across worker counts")
{
    auto cfg = base_config();
    cfg.cities = "all";
    cfg.workers = 1;
    const auto a = oracle::scratch("pipeline_w1");
    export_outputs(run_pipeline(cfg), a, cfg.format_set());
    cfg.workers = 8;
    const auto b = oracle::scratch("pipeline_w8");
    export_outputs(run_pipeline(cfg), b, cfg.format_set());
    const auto ta = oracle::tree(a);
    const auto tb = oracle::tree(b);
    CHECK(ta.size() > 20);
    CHECK(ta == tb);
}

TEST_CASE("an empty input directory is a data error")
{
    auto cfg = base_config();
    cfg.input = oracle::scratch("pipeline_empty");
    CHECK_THROWS_WITH_AS(run_pipeline(cfg), doctest::Contains("no input files"), DataError);
}

TEST_CASE("CLI exit codes")
{
    const auto dir = oracle::scratch("pipeline_cli");
    const auto synth_out = (dir / "corpus").string();
    REQUIRE(cli("synth --spec \"" + std::string(GEOPHOTO_DATA_DIR) + "/synth_default.json\" --out \"" + synth_out
                + "\"")
            == 0);
    CHECK(cli("run --config \"" + synth_out + "/run_config.json\" --out \"" + (dir / "run").string() + "\" --city NYC")
          == 0);
    CHECK(std::filesystem::exists(dir / "run" / "report.json"));
    CHECK(cli("homes --config \"" + synth_out + "/run_config.json\" --out \"" + (dir / "homes").string() + "\"") == 0);
    CHECK(std::filesystem::exists(dir / "homes" / "homes.csv"));

    std::filesystem::create_directories(dir / "empty");
    CHECK(cli("run --input \"" + (dir / "empty").string() + "\" --out \"" + (dir / "x").string() + "\"") == 3);
    CHECK(cli("run --config \"" + synth_out + "/run_config.json\" --window 2010-01-01..2007-01-01") == 2);
    CHECK(cli("run --config \"" + synth_out + "/run_config.json\" --min-photos zero") == 2);
    CHECK(cli("frobnicate") == 2);
    CHECK(cli("--help") == 0);
}
