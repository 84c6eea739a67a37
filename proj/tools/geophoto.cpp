#include "geophoto/error.hpp"
#include "geophoto/pipeline.hpp"
#include "geophoto/synth.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using geophoto::PipelineConfig;
using geophoto::Stage;

namespace {

struct PipelineFlags {
    std::string config;
    std::map<std::string, std::string> values; // flag name -> raw text, applied over the config file
    std::optional<bool> null_model;
    std::optional<bool> distance_decay;
    std::string timings_file;
};

void add_value(CLI::App* cmd, PipelineFlags& flags, const std::string& name, const std::string& help)
{
    cmd->add_option_function<std::string>(
        "--" + name, [&flags, name](const std::string& v) { flags.values[name] = v; }, help);
}

void add_pipeline_flags(CLI::App* cmd, PipelineFlags& f)
{
    cmd->add_option("--config", f.config, "Flat JSON config file");
    add_value(cmd, f, "input", "Directory of <location>_<label>.csv files");
    add_value(cmd, f, "registry", "City registry CSV");
    add_value(cmd, f, "aliases", "Location alias CSV");
    add_value(cmd, f, "window", "Analysis window <start>..<end>");
    add_value(cmd, f, "min-photos", "Minimum photos in the home city");
    add_value(cmd, f, "min-span-days", "Home activity span must exceed this many days");
    add_value(cmd, f, "cell-size", "Grid cell size in meters");
    add_value(cmd, f, "hotspots", "Number of hotspots per city");
    add_value(cmd, f, "coverage-max", "Largest n in the hotspot coverage series");
    add_value(cmd, f, "regions", "Region set: top10+rest, top10, or ids[,...][+rest]");
    add_value(cmd, f, "city", "Cities for the spatial stage: focus, all, or ids");
    add_value(cmd, f, "categories", "Layers for the spatial stage: all or a list");
    add_value(cmd, f, "formats", "Output formats: csv,json,geojson");
    add_value(cmd, f, "decay-groups", "Two continent codes compared by the decay analysis");
    add_value(cmd, f, "lognormal-model", "binned or continuous");
    add_value(cmd, f, "seed", "Random seed");
    add_value(cmd, f, "out", "Output directory");
    add_value(cmd, f, "workers", "Worker threads");
    cmd->add_flag_function(
        "--null-model,!--no-null-model", [&f](std::int64_t n) { f.null_model = n > 0; }, "Compute null-model ratios");
    cmd->add_flag_function(
        "--distance-decay,!--no-distance-decay", [&f](std::int64_t n) { f.distance_decay = n > 0; },
        "Fit distance decay and compare directions");
    cmd->add_option("--timings-file", f.timings_file, "Write stage timings as JSON here");
}

PipelineConfig resolve(const PipelineFlags& f)
{
    PipelineConfig cfg = f.config.empty() ? PipelineConfig{} : PipelineConfig::load(f.config);
    for (const auto& [k, v] : f.values) {
        cfg.set(k, v);
    }
    if (f.null_model) {
        cfg.null_model = *f.null_model;
    }
    if (f.distance_decay) {
        cfg.distance_decay = *f.distance_decay;
    }
    return cfg;
}

void report_timings(const geophoto::PipelineResult& r, const std::string& path)
{
    nlohmann::json t;
    t["workers"] = r.config.workers;
    for (const auto& s : r.timings) {
        std::cerr << "stage " << s.stage << ": " << s.seconds << " s\n";
        t["stages"][s.stage] = s.seconds;
    }
    std::cerr << "workers: " << r.config.workers << '\n';
    if (!path.empty()) {
        std::ofstream out(path);
        out << t.dump(2) << '\n';
    }
}

int run_verb(const PipelineFlags& flags, Stage until, bool write_records)
{
    PipelineConfig cfg = resolve(flags);
    if (write_records) {
        cfg.write_records = true;
    }
    const auto result = geophoto::run_pipeline(cfg, until);
    geophoto::export_outputs(result, cfg.out, cfg.format_set());
    report_timings(result, flags.timings_file);

    const auto& s = result.ingest.stats;
    std::cout << "ingest: read " << s.records_read << ", kept " << s.records_kept << ", duplicates "
              << s.duplicates_removed << ", bad timestamps " << s.bad_timestamps_removed << ", out of window "
              << s.out_of_window_removed << ", invalid " << s.invalid_rows_removed << '\n';
    if (result.reached != Stage::ingest) {
        std::cout << "homes: " << result.homes.homed_users() << " of " << result.homes.assignments().size()
                  << " users homed, " << result.unassigned << " photos unassigned\n";
    }
    if (result.reached == Stage::flows || result.reached == Stage::spatial) {
        std::cout << "flows: " << result.network.od.size() << " regions\n";
    }
    if (result.reached == Stage::spatial) {
        std::cout << "spatial: " << result.spatial.size() << " cities\n";
    }
    std::cout << "outputs written to " << cfg.out.string() << '\n';
    if (result.numeric_failure) {
        std::cerr << "error: at least one fit did not converge; see report.json\n";
        return 4;
    }
    return 0;
}

int run_synth(const std::string& spec_path, const std::optional<std::uint64_t>& seed, const std::string& registry,
              const std::string& out)
{
    auto spec = geophoto::SynthSpec::load(spec_path);
    if (seed) {
        spec.seed = *seed;
    }
    const fs::path reg_path = registry.empty() ? fs::path(GEOPHOTO_DATA_DIR) / "registry.csv" : fs::path(registry);
    const auto reg = geophoto::CityRegistry::load(reg_path);
    const auto manifest = geophoto::synth_generate(spec, reg, out);
    nlohmann::json run_config = {{"input", "photos"},
                                 {"aliases", "aliases.csv"},
                                 {"registry", fs::absolute(reg_path).lexically_normal().string()},
                                 {"window", manifest["window"]["start"].get<std::string>() + ".."
                                                + manifest["window"]["end"].get<std::string>()},
                                 {"min_photos", spec.min_photos},
                                 {"min_span_days", spec.min_span_days}};
    std::ofstream(fs::path(out) / "run_config.json") << run_config.dump(2) << '\n';
    const auto& c = manifest["counts"];
    std::cout << "synth: " << c["records_total"] << " rows (" << c["clean_records"] << " clean, "
              << c["duplicates"] << " duplicates, " << c["bad_timestamps"] << " bad timestamps, "
              << c["out_of_window"] << " out of window) written to " << out << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Geotagged photo mobility analytics"};
    app.require_subcommand(1);

    struct Verb {
        const char* name;
        const char* help;
        Stage until;
        bool records;
    };
    const Verb verbs[] = {
        {"ingest", "Parse, deduplicate and window-filter photo records", Stage::ingest, true},
        {"homes", "Infer home cities and classify activity", Stage::homes, false},
        {"flows", "Build the origin-destination network and its metrics", Stage::flows, false},
        {"spatial", "Grid densities, fits and hotspots per city", Stage::spatial, false},
        {"run", "Run every stage and write all outputs", Stage::spatial, false},
        {"export", "Run every stage and export in the chosen formats", Stage::spatial, false},
    };
    std::map<std::string, PipelineFlags> flags;
    std::map<std::string, CLI::App*> commands;
    for (const auto& v : verbs) {
        auto* cmd = app.add_subcommand(v.name, v.help);
        add_pipeline_flags(cmd, flags[v.name]);
        commands[v.name] = cmd;
    }

    std::string synth_spec = std::string(GEOPHOTO_DATA_DIR) + "/synth_default.json";
    std::optional<std::uint64_t> synth_seed;
    std::string synth_registry;
    std::string synth_out = "synth_out";
    auto* synth = app.add_subcommand("synth", "Generate a deterministic synthetic corpus with a truth manifest");
    synth->add_option("--spec,--config", synth_spec, "Synthetic corpus spec (JSON)");
    synth->add_option("--seed", synth_seed, "Override the spec seed");
    synth->add_option("--registry", synth_registry, "City registry CSV");
    synth->add_option("--out", synth_out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (synth->parsed()) {
            return run_synth(synth_spec, synth_seed, synth_registry, synth_out);
        }
        for (const auto& v : verbs) {
            if (commands[v.name]->parsed()) {
                return run_verb(flags[v.name], v.until, v.records);
            }
        }
    } catch (const geophoto::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const geophoto::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const geophoto::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 4;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
