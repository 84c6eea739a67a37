#include "geophoto/pipeline.hpp"

#include "geophoto/csv.hpp"
#include "geophoto/error.hpp"
#include "geophoto/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#ifndef GEOPHOTO_DATA_DIR
#define GEOPHOTO_DATA_DIR "data"
#endif

namespace geophoto {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string as_string(const json& v, const std::string& key)
{
    if (v.is_string()) {
        return v.get<std::string>();
    }
    if (v.is_array()) {
        std::string joined;
        for (const auto& e : v) {
            if (!joined.empty()) {
                joined += ',';
            }
            joined += as_string(e, key);
        }
        return joined;
    }
    if (v.is_number() || v.is_boolean()) {
        return v.dump();
    }
    throw ConfigError("config key '" + key + "' expects text");
}

double as_double(const json& v, const std::string& key)
{
    if (v.is_number()) {
        return v.get<double>();
    }
    if (v.is_string()) {
        try {
            return csv::parse_double(v.get<std::string>(), key);
        } catch (const DataError& e) {
            throw ConfigError(e.what());
        }
    }
    throw ConfigError("config key '" + key + "' expects a number");
}

std::uint64_t as_count(const json& v, const std::string& key)
{
    const double d = as_double(v, key);
    if (!(d >= 0.0) || d != std::floor(d) || d > 1e15) {
        throw ConfigError("config key '" + key + "' expects a non-negative integer");
    }
    return static_cast<std::uint64_t>(d);
}

bool as_bool(const json& v, const std::string& key)
{
    if (v.is_boolean()) {
        return v.get<bool>();
    }
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "true" || s == "1" || s == "yes" || s == "on") {
            return true;
        }
        if (s == "false" || s == "0" || s == "no" || s == "off") {
            return false;
        }
    }
    if (v.is_number_integer()) {
        return v.get<long long>() != 0;
    }
    throw ConfigError("config key '" + key + "' expects true or false");
}

std::vector<std::string> split_list(const std::string& text)
{
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) {
            out.push_back(item.substr(b, e - b + 1));
        }
    }
    return out;
}

Instant parse_instant_or_throw(const std::string& text)
{
    auto t = parse_instant(text);
    if (!t) {
        throw ConfigError("unparseable instant '" + text + "'");
    }
    return *t;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::ofstream open_out(const fs::path& path)
{
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("cannot write '" + path.string() + "'");
    }
    return out;
}

void write_json(const fs::path& path, const json& j)
{
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

std::string num(double v) { return csv::format_double(v); }

template <typename T>
std::string opt_num(const std::optional<T>& v)
{
    return v ? num(static_cast<double>(*v)) : std::string("null");
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

} // namespace

// ---------------------------------------------------------------------------
// Configuration

void PipelineConfig::set(std::string key, const json& value)
{
    std::replace(key.begin(), key.end(), '-', '_');
    if (key == "input") {
        input = as_string(value, key);
    } else if (key == "registry") {
        registry = as_string(value, key);
    } else if (key == "aliases") {
        const auto s = as_string(value, key);
        aliases = s.empty() ? std::nullopt : std::optional<fs::path>(s);
    } else if (key == "window") {
        window = TimeWindow::parse(as_string(value, key));
    } else if (key == "window_start") {
        window.start = parse_instant_or_throw(as_string(value, key));
    } else if (key == "window_end") {
        window.end = parse_instant_or_throw(as_string(value, key));
    } else if (key == "min_photos") {
        home.min_photos = as_count(value, key);
    } else if (key == "min_span_days") {
        home.min_span_days = as_double(value, key);
    } else if (key == "cell_size") {
        cell_size_m = as_double(value, key);
    } else if (key == "hotspots") {
        hotspots = as_count(value, key);
    } else if (key == "coverage_max") {
        coverage_max = as_count(value, key);
    } else if (key == "regions") {
        regions = as_string(value, key);
    } else if (key == "cities" || key == "city") {
        cities = as_string(value, key);
    } else if (key == "categories") {
        categories = as_string(value, key);
    } else if (key == "formats") {
        formats = as_string(value, key);
    } else if (key == "null_model") {
        null_model = as_bool(value, key);
    } else if (key == "distance_decay") {
        distance_decay = as_bool(value, key);
    } else if (key == "decay_groups") {
        decay_groups = as_string(value, key);
    } else if (key == "lognormal_model") {
        lognormal_model = as_string(value, key);
    } else if (key == "out") {
        out = as_string(value, key);
    } else if (key == "workers") {
        workers = static_cast<unsigned>(as_count(value, key));
    } else if (key == "seed") {
        seed = as_count(value, key);
    } else if (key == "write_records") {
        write_records = as_bool(value, key);
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }
}

void PipelineConfig::merge_json(const json& j)
{
    if (!j.is_object()) {
        throw ConfigError("config must be a flat JSON object");
    }
    for (const auto& [k, v] : j.items()) {
        set(k, v);
    }
}

PipelineConfig PipelineConfig::load(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config '" + path.string() + "'");
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    PipelineConfig c;
    c.merge_json(j);
    // Relative paths in a config file are relative to the file itself.
    const fs::path base = path.parent_path();
    const auto rebase = [&](fs::path& p) {
        if (!p.empty() && p.is_relative()) {
            p = base / p;
        }
    };
    if (j.contains("input")) {
        rebase(c.input);
    }
    if (j.contains("registry")) {
        rebase(c.registry);
    }
    if (c.aliases && j.contains("aliases")) {
        rebase(*c.aliases);
    }
    if (j.contains("out")) {
        rebase(c.out);
    }
    return c;
}

void PipelineConfig::validate() const
{
    if (!(window.start < window.end)) {
        throw ConfigError("window start must precede window end");
    }
    if (home.min_photos == 0 || !(home.min_span_days > 0.0)) {
        throw ConfigError("min_photos and min_span_days must be positive");
    }
    if (!(cell_size_m > 0.0) || hotspots == 0 || workers == 0) {
        throw ConfigError("cell_size, hotspots and workers must be positive");
    }
    if (input.empty()) {
        throw ConfigError("no input directory configured");
    }
    if (!fs::is_directory(input)) {
        throw ConfigError("input directory '" + input.string() + "' does not exist");
    }
    const fs::path reg = registry.empty() ? fs::path(GEOPHOTO_DATA_DIR) / "registry.csv" : registry;
    if (!fs::is_regular_file(reg)) {
        throw ConfigError("registry '" + reg.string() + "' does not exist");
    }
    if (aliases && !fs::is_regular_file(*aliases)) {
        throw ConfigError("alias file '" + aliases->string() + "' does not exist");
    }
    (void)layers();
    (void)format_set();
    (void)lognormal();
    if (split_list(decay_groups).size() != 2) {
        throw ConfigError("decay_groups needs exactly two continent codes");
    }
}

RegionScheme PipelineConfig::region_scheme(const CityRegistry& reg) const
{
    std::string spec = regions;
    bool rest = false;
    if (const auto plus = spec.rfind("+rest"); plus != std::string::npos && plus + 5 == spec.size()) {
        rest = true;
        spec.resize(plus);
    }
    RegionScheme scheme = RegionScheme::ten_city_default();
    scheme.include_rest = rest;
    if (spec != "top10") {
        scheme.focus_cities = split_list(spec);
        for (auto& b : scheme.buckets) {
            b.population.reset(); // bucket populations only hold for the default focus set
        }
        if (scheme.focus_cities.empty()) {
            throw ConfigError("region set '" + regions + "' names no cities");
        }
    }
    for (const auto& id : scheme.focus_cities) {
        if (!reg.find(id)) {
            throw ConfigError("region city '" + id + "' is not in the registry");
        }
    }
    return scheme;
}

std::vector<Layer> PipelineConfig::layers() const
{
    if (categories == "all") {
        return {kReportLayers.begin(), kReportLayers.end()};
    }
    std::vector<Layer> out;
    for (const auto& name : split_list(categories)) {
        auto l = parse_layer(name);
        if (!l) {
            throw ConfigError("unknown category '" + name + "'");
        }
        out.push_back(*l);
    }
    if (out.empty()) {
        throw ConfigError("no categories selected");
    }
    return out;
}

std::set<std::string> PipelineConfig::format_set() const
{
    std::set<std::string> out;
    for (const auto& f : split_list(formats)) {
        if (f != "csv" && f != "json" && f != "geojson") {
            throw ConfigError("unknown format '" + f + "'");
        }
        out.insert(f);
    }
    return out;
}

LognormalModel PipelineConfig::lognormal() const
{
    if (lognormal_model == "binned") {
        return LognormalModel::binned;
    }
    if (lognormal_model == "continuous") {
        return LognormalModel::continuous;
    }
    throw ConfigError("lognormal_model must be 'binned' or 'continuous'");
}

// ---------------------------------------------------------------------------
// Stages

namespace {

void run_homes(PipelineResult& r)
{
    const auto& cfg = r.config;
    r.registry = std::make_unique<CityRegistry>(
        CityRegistry::load(cfg.registry.empty() ? fs::path(GEOPHOTO_DATA_DIR) / "registry.csv" : cfg.registry));
    if (cfg.aliases) {
        r.registry->load_aliases(*cfg.aliases);
    }
    const auto& records = r.ingest.records;
    std::vector<std::optional<std::string>> located(records.size());
    parallel_for(records.size(), cfg.workers, [&](std::size_t i) { located[i] = r.registry->locate(records[i]); });
    r.photos.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (located[i]) {
            r.photos.push_back(CityPhoto{records[i], std::move(*located[i])});
        } else {
            ++r.unassigned;
        }
    }
    r.summaries = summarize_user_city_activity(r.photos);
    r.homes = infer_homes(r.summaries, cfg.home, *r.registry, cfg.workers);
    r.categories.resize(r.photos.size());
    parallel_for(r.photos.size(), cfg.workers, [&](std::size_t i) {
        r.categories[i] = categorize_photo(r.photos[i].city_id, r.homes.find(r.photos[i].record.user_id), *r.registry);
    });
    r.label_consistency = check_label_consistency(r.photos, r.homes);
}

void run_flows(PipelineResult& r)
{
    const auto& cfg = r.config;
    r.regions = std::make_unique<RegionMap>(*r.registry, cfg.region_scheme(*r.registry));
    r.network = build_flow_network(r.photos, r.categories, r.homes, *r.regions, cfg.workers);
    r.marginals = flow_marginals(r.network.od);
    if (cfg.null_model && r.regions->size() >= 2) {
        r.null_model = null_model_matrix(r.network.od, r.marginals);
        if (cfg.distance_decay) {
            const auto groups = split_list(cfg.decay_groups);
            r.decay = distance_decay_analysis(decay_points(*r.null_model, *r.regions), groups.at(0), groups.at(1));
        }
    }
    r.origins = origin_totals(r.photos, r.homes);
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& o : r.origins) {
        xs.push_back(static_cast<double>(o.users));
        ys.push_back(static_cast<double>(o.photos));
    }
    try {
        r.users_vs_photos = stats::linear_regression_r2(xs, ys);
    } catch (const DataError& e) {
        r.users_vs_photos_error = e.what();
    }
}

std::vector<std::string> spatial_cities(const PipelineResult& r)
{
    const auto& cfg = r.config;
    std::map<std::string, std::size_t, std::less<>> photo_count;
    for (const auto& p : r.photos) {
        ++photo_count[p.city_id];
    }
    std::vector<std::string> out;
    if (cfg.cities == "focus" || cfg.cities == "all") {
        std::vector<std::string> candidates;
        if (cfg.cities == "focus") {
            candidates = cfg.region_scheme(*r.registry).focus_cities;
        } else {
            for (const auto& c : r.registry->cities()) {
                candidates.push_back(c.city_id);
            }
        }
        for (const auto& id : candidates) {
            if (photo_count.contains(id)) {
                out.push_back(id);
            }
        }
        return out;
    }
    for (const auto& id : split_list(cfg.cities)) {
        if (!r.registry->find(id)) {
            throw ConfigError("spatial city '" + id + "' is not in the registry");
        }
        out.push_back(id);
    }
    return out;
}

CitySpatial analyse_city(const PipelineResult& r, const std::string& city_id, unsigned workers,
                         bool& numeric_failure)
{
    const auto& cfg = r.config;
    CitySpatial cs;
    cs.city_id = city_id;
    std::vector<CategorizedPoint> points;
    for (std::size_t i = 0; i < r.photos.size(); ++i) {
        if (r.photos[i].city_id == city_id) {
            points.push_back({{r.photos[i].record.lat, r.photos[i].record.lon}, r.categories[i]});
        }
    }
    const GridSpec grid = GridSpec::for_city(r.registry->at(city_id), cfg.cell_size_m);
    cs.field = accumulate_density(points, grid, workers);

    const auto layers = cfg.layers();
    for (Layer layer : layers) {
        try {
            cs.lognormal_fits.emplace_back(layer, density_distribution_fit(cs.field, layer, cfg.lognormal()));
        } catch (const ConvergenceError& e) {
            numeric_failure = true;
            cs.lognormal_skips.emplace_back(layer, std::string("did not converge: ") + e.what());
        } catch (const DataError& e) {
            cs.lognormal_skips.emplace_back(layer, e.what());
        }
        if (cs.field.total(layer) > 0) {
            cs.quintiles.emplace_back(layer, quintile_area_curve(cs.field, layer));
        }
    }
    cs.area_ratios = tourist_resident_area_ratio(cs.field);

    try {
        cs.hotspots = extract_hotspots(cs.field, Layer::total, cfg.hotspots);
    } catch (const DataError& e) {
        cs.hotspot_error = e.what();
    }
    if (!cs.hotspots.empty()) {
        for (Layer layer : layers) {
            auto act = hotspot_layer_activity(cs.hotspots, cs.field, layer);
            try {
                cs.rank_fits.emplace_back(layer, hotspot_rank_profile({act.begin(), act.end()}));
            } catch (const DataError& e) {
                cs.rank_skips.emplace_back(layer, e.what());
            }
            cs.hotspot_activity.emplace_back(layer, std::move(act));
        }
    }
    cs.coverage = hotspot_coverage_series(cs.field, Layer::total, cfg.coverage_max);
    return cs;
}

void run_spatial(PipelineResult& r)
{
    const auto ids = spatial_cities(r);
    r.spatial.resize(ids.size());
    std::vector<char> failed(ids.size(), 0);
    const unsigned inner = ids.size() == 1 ? r.config.workers : 1u;
    parallel_for(ids.size(), r.config.workers, [&](std::size_t k) {
        bool f = false;
        r.spatial[k] = analyse_city(r, ids[k], inner, f);
        failed[k] = f ? 1 : 0;
    });
    for (char f : failed) {
        r.numeric_failure = r.numeric_failure || f != 0;
    }
}

} // namespace

PipelineResult run_pipeline(const PipelineConfig& config, Stage until)
{
    config.validate();
    PipelineResult r;
    r.config = config;

    auto t0 = std::chrono::steady_clock::now();
    IngestOptions opts;
    opts.window = config.window;
    opts.workers = config.workers;
    r.ingest = ingest_files(discover_inputs(config.input), opts);
    r.timings.push_back({"ingest", seconds_since(t0)});
    r.reached = Stage::ingest;
    if (until == Stage::ingest) {
        return r;
    }

    const auto stage = [&](const char* name, Stage s, auto&& fn) {
        const auto start = std::chrono::steady_clock::now();
        try {
            fn(r);
        } catch (const ConfigError& e) {
            throw ConfigError(std::string(name) + ": " + e.what());
        } catch (const ConvergenceError& e) {
            throw ConvergenceError(std::string(name) + ": " + e.what());
        } catch (const NumericError& e) {
            throw NumericError(std::string(name) + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError(std::string(name) + ": " + e.what());
        }
        r.timings.push_back({name, seconds_since(start)});
        r.reached = s;
    };
    stage("homes", Stage::homes, run_homes);
    if (until == Stage::homes) {
        return r;
    }
    stage("flows", Stage::flows, run_flows);
    if (until == Stage::flows) {
        return r;
    }
    stage("spatial", Stage::spatial, run_spatial);
    return r;
}

// ---------------------------------------------------------------------------
// Report

json PipelineResult::report() const
{
    json rep;
    const auto& c = config;
    rep["config"] = {{"window", {format_instant(c.window.start), format_instant(c.window.end)}},
                     {"min_photos", c.home.min_photos},
                     {"min_span_days", c.home.min_span_days},
                     {"cell_size", c.cell_size_m},
                     {"hotspots", c.hotspots},
                     {"regions", c.regions},
                     {"categories", c.categories},
                     {"lognormal_model", c.lognormal_model},
                     {"null_model", c.null_model},
                     {"distance_decay", c.distance_decay}};

    json ing = ingest.stats;
    ing["balanced"] = ingest.stats.balanced();
    json issues = json::array();
    for (const auto& i : ingest.issues) {
        issues.push_back({{"file", i.file}, {"line", i.error.line}, {"message", i.error.message}});
    }
    ing["issues"] = issues;
    rep["ingest"] = ing;
    rep["numeric_failure"] = numeric_failure;
    if (reached == Stage::ingest) {
        return rep;
    }

    ActivityTally tally;
    for (auto cat : categories) {
        tally.add(cat);
    }
    rep["homes"] = {
        {"photos_located", photos.size()},
        {"photos_unassigned", unassigned},
        {"reconciles", photos.size() + unassigned == ingest.stats.records_kept},
        {"users", homes.assignments().size()},
        {"homed_users", homes.homed_users()},
        {"user_city_summaries", summaries.size()},
        {"categories",
         {{"resident", tally.resident}, {"domestic_tourist", tally.domestic}, {"foreign_tourist", tally.foreign},
          {"unknown_home", tally.unknown}}},
        {"label_consistency",
         {{"users_compared", label_consistency.users_compared},
          {"contradictions", label_consistency.contradictions},
          {"rate", label_consistency.contradiction_rate()}}}};
    if (reached == Stage::homes) {
        return rep;
    }

    json fl;
    const auto& ids = network.od.regions();
    fl["regions"] = ids;
    json matrix = json::array();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < ids.size(); ++j) {
            row.push_back(network.od.at(i, j));
        }
        matrix.push_back(row);
    }
    fl["od_matrix"] = matrix;
    fl["marginals"] = {{"w_in", marginals.w_in},
                       {"w_out", marginals.w_out},
                       {"w_in_star", marginals.w_in_star},
                       {"w_out_star", marginals.w_out_star}};
    std::int64_t inbound_total = 0;
    for (const auto& t : network.inbound) {
        inbound_total += t.classified() + t.unknown;
    }
    fl["unmapped_photos"] = network.unmapped_photos;
    fl["reconciles"] = static_cast<std::size_t>(inbound_total) + network.unmapped_photos == photos.size();
    json rates = json::object();
    const auto pc = per_capita_rates(marginals, *regions);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        rates[ids[i]] = opt_json(pc[i]);
    }
    fl["per_capita_rates"] = rates;
    if (null_model) {
        json undefined = json::array();
        for (std::size_t i = 0; i < null_model->n; ++i) {
            if (!null_model->row_defined[i]) {
                undefined.push_back(ids[i]);
            }
        }
        fl["null_model"] = {{"undefined_rows", undefined}};
    }
    if (decay) {
        json d;
        d["points"] = decay->points.size();
        d["fit"] = decay->fit ? json(*decay->fit) : json(nullptr);
        if (!decay->fit_error.empty()) {
            d["fit_error"] = decay->fit_error;
        }
        const auto& cmp = decay->comparison;
        d["comparison"] = {{"group_a", cmp.group_a},
                           {"group_b", cmp.group_b},
                           {"mean_a_to_b", opt_json(cmp.mean_a_to_b)},
                           {"mean_b_to_a", opt_json(cmp.mean_b_to_a)},
                           {"n_a_to_b", cmp.n_a_to_b},
                           {"n_b_to_a", cmp.n_b_to_a},
                           {"stronger", cmp.stronger ? json(*cmp.stronger) : json(nullptr)}};
        fl["distance_decay"] = d;
    }
    fl["users_vs_photos"] = users_vs_photos ? json(*users_vs_photos) : json({{"error", users_vs_photos_error}});
    rep["flows"] = fl;
    if (reached == Stage::flows) {
        return rep;
    }

    json sp = json::object();
    for (const auto& cs : spatial) {
        json city;
        const auto& g = cs.field.grid();
        city["grid"] = {{"anchor", {g.anchor_lat, g.anchor_lon}},
                        {"cell_size_m", g.cell_size_m},
                        {"rows", g.n_rows},
                        {"cols", g.n_cols}};
        city["outside"] = cs.field.outside;
        json totals = json::object();
        for (Layer l : kAllLayers) {
            totals[std::string(to_string(l))] = cs.field.total(l);
        }
        city["totals"] = totals;
        json ln = json::object();
        for (const auto& [l, f] : cs.lognormal_fits) {
            ln[std::string(to_string(l))] = f;
        }
        for (const auto& [l, why] : cs.lognormal_skips) {
            ln[std::string(to_string(l))] = {{"skipped", why}};
        }
        city["lognormal"] = ln;
        city["area_ratios"] = {{"domestic", opt_json(cs.area_ratios.domestic)},
                               {"foreign", opt_json(cs.area_ratios.foreign)}};
        json hs = json::array();
        for (const auto& h : cs.hotspots) {
            hs.push_back({{"rank", h.rank}, {"cells", h.cells.size()}, {"activity", h.activity},
                          {"threshold", h.threshold}});
        }
        city["hotspots"] = hs;
        if (!cs.hotspot_error.empty()) {
            city["hotspot_error"] = cs.hotspot_error;
        }
        json rf = json::object();
        for (const auto& [l, f] : cs.rank_fits) {
            rf[std::string(to_string(l))] = f;
        }
        for (const auto& [l, why] : cs.rank_skips) {
            rf[std::string(to_string(l))] = {{"skipped", why}};
        }
        city["rank_fits"] = rf;
        for (const auto& p : cs.coverage) {
            if (p.n == c.hotspots) {
                city["coverage"] = p.coverage;
            }
        }
        sp[cs.city_id] = city;
    }
    rep["spatial"] = sp;
    return rep;
}

// ---------------------------------------------------------------------------
// Export

namespace {

void export_flows(const PipelineResult& r, const fs::path& dir, const std::set<std::string>& formats)
{
    const auto& ids = r.network.od.regions();
    const auto& regions = r.regions->regions();
    const std::size_t n = ids.size();
    if (formats.contains("csv")) {
        fs::create_directories(dir);
        write_count_matrix_csv(dir / "od_matrix.csv", r.network.od);

        const auto pc = per_capita_rates(r.marginals, *r.regions);
        {
            auto out = open_out(dir / "marginals.csv");
            out << "region,w_in,w_out,w_in_star,w_out_star\n";
            for (std::size_t i = 0; i < n; ++i) {
                out << csv::escape(ids[i]) << ',' << r.marginals.w_in[i] << ',' << r.marginals.w_out[i] << ','
                    << r.marginals.w_in_star[i] << ',' << r.marginals.w_out_star[i] << '\n';
            }
        }
        {
            auto out = open_out(dir / "per_capita.csv");
            out << "region,population,photos,photos_per_1000\n";
            for (std::size_t i = 0; i < n; ++i) {
                out << csv::escape(ids[i]) << ',' << opt_num(regions[i].population) << ',' << r.marginals.w_out[i]
                    << ',' << opt_num(pc[i]) << '\n';
            }
        }
        {
            auto out = open_out(dir / "edges.csv");
            out << "origin,destination,photos";
            if (r.null_model) {
                out << ",model,ratio";
            }
            out << '\n';
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    if (i == j) {
                        continue;
                    }
                    out << csv::escape(ids[i]) << ',' << csv::escape(ids[j]) << ',' << r.network.od.at(i, j);
                    if (r.null_model) {
                        out << ',' << opt_num(r.null_model->model_at(i, j)) << ','
                            << opt_num(r.null_model->ratio_at(i, j));
                    }
                    out << '\n';
                }
            }
        }
        if (r.null_model) {
            write_ratio_matrix_csv(dir / "null_model_ratio.csv", ids, *r.null_model);
        }
        {
            auto out = open_out(dir / "attractiveness.csv");
            out << "region,population,domestic_inflow,foreign_inflow,domestic_per_capita,foreign_per_capita\n";
            for (std::size_t i = 0; i < n; ++i) {
                const auto& t = r.network.inbound[i];
                out << csv::escape(ids[i]) << ',' << opt_num(regions[i].population) << ',' << t.domestic << ','
                    << t.foreign;
                if (regions[i].population && *regions[i].population > 0.0) {
                    const auto a = relative_attractiveness(t, *regions[i].population);
                    out << ',' << num(a.domestic) << ',' << num(a.foreign);
                } else {
                    out << ",null,null";
                }
                out << '\n';
            }
        }
        {
            auto out = open_out(dir / "city_breakdown.csv");
            out << "region,resident,domestic,foreign,classified,unknown_home\n";
            for (std::size_t i = 0; i < n; ++i) {
                const auto b = city_activity_breakdown(r.network.inbound[i]);
                out << csv::escape(ids[i]);
                if (b.shares) {
                    out << ',' << num(b.shares->home) << ',' << num(b.shares->domestic) << ','
                        << num(b.shares->foreign);
                } else {
                    out << ",null,null,null";
                }
                out << ',' << b.classified << ',' << b.unknown_home << '\n';
            }
        }
        {
            auto out = open_out(dir / "resident_breakdown.csv");
            out << "region,home,domestic,foreign,photos\n";
            for (std::size_t i = 0; i < n; ++i) {
                const auto s = resident_destination_breakdown(r.network.outbound[i]);
                out << csv::escape(ids[i]);
                if (s) {
                    out << ',' << num(s->home) << ',' << num(s->domestic) << ',' << num(s->foreign);
                } else {
                    out << ",null,null,null";
                }
                out << ',' << r.network.outbound[i].classified() << '\n';
            }
        }
        if (r.decay) {
            auto out = open_out(dir / "decay_points.csv");
            out << "origin,destination,origin_group,destination_group,distance_km,ratio,residual\n";
            for (std::size_t k = 0; k < r.decay->points.size(); ++k) {
                const auto& p = r.decay->points[k];
                out << csv::escape(p.origin) << ',' << csv::escape(p.destination) << ',' << p.origin_group << ','
                    << p.destination_group << ',' << num(p.distance_km) << ',' << num(p.ratio) << ','
                    << opt_num(k < r.decay->residuals.size() ? r.decay->residuals[k] : std::nullopt) << '\n';
            }
        }
        {
            auto out = open_out(dir / "users_vs_photos.csv");
            out << "city_id,users,photos\n";
            for (const auto& o : r.origins) {
                out << csv::escape(o.city_id) << ',' << o.users << ',' << o.photos << '\n';
            }
        }
    }
    if (formats.contains("json") && r.decay) {
        json d;
        const auto& cmp = r.decay->comparison;
        d["comparison"] = {{"group_a", cmp.group_a},
                           {"group_b", cmp.group_b},
                           {"mean_a_to_b", opt_json(cmp.mean_a_to_b)},
                           {"mean_b_to_a", opt_json(cmp.mean_b_to_a)},
                           {"n_a_to_b", cmp.n_a_to_b},
                           {"n_b_to_a", cmp.n_b_to_a},
                           {"stronger", cmp.stronger ? json(*cmp.stronger) : json(nullptr)}};
        json means = json::array();
        for (const auto& g : r.decay->group_means) {
            means.push_back({{"origin_group", g.origin_group},
                             {"destination_group", g.destination_group},
                             {"mean_ratio", g.mean_ratio},
                             {"pairs", g.pairs}});
        }
        d["group_means"] = means;
        d["fit"] = r.decay->fit ? json(*r.decay->fit) : json(nullptr);
        if (!r.decay->fit_error.empty()) {
            d["fit_error"] = r.decay->fit_error;
        }
        write_json(dir / "directional.json", d);
    }
}

json city_fits_json(const CitySpatial& cs)
{
    json j;
    json ln = json::object();
    for (const auto& [l, f] : cs.lognormal_fits) {
        ln[std::string(to_string(l))] = f;
    }
    for (const auto& [l, why] : cs.lognormal_skips) {
        ln[std::string(to_string(l))] = {{"skipped", why}};
    }
    j["lognormal"] = ln;
    json q = json::object();
    for (const auto& [l, curve] : cs.quintiles) {
        q[std::string(to_string(l))] = {{"percents", curve.percents},
                                        {"cells", curve.cells},
                                        {"normalized", curve.normalized}};
    }
    j["quintile_curves"] = q;
    j["area_ratios"] = {{"domestic", opt_json(cs.area_ratios.domestic)},
                        {"foreign", opt_json(cs.area_ratios.foreign)}};
    json rf = json::object();
    for (const auto& [l, f] : cs.rank_fits) {
        rf[std::string(to_string(l))] = f;
    }
    for (const auto& [l, why] : cs.rank_skips) {
        rf[std::string(to_string(l))] = {{"skipped", why}};
    }
    j["rank_fits"] = rf;
    json act = json::object();
    for (const auto& [l, a] : cs.hotspot_activity) {
        act[std::string(to_string(l))] = a;
    }
    j["hotspot_activity"] = act;
    json cov = json::array();
    for (const auto& p : cs.coverage) {
        cov.push_back({{"n", p.n}, {"hotspots", p.hotspots}, {"coverage", p.coverage}});
    }
    j["coverage"] = cov;
    return j;
}

void export_spatial(const PipelineResult& r, const fs::path& dir, const std::set<std::string>& formats)
{
    const bool csv_out = formats.contains("csv");
    std::ofstream ln_out;
    std::ofstream q_out;
    std::ofstream ratio_out;
    std::ofstream cov_out;
    std::ofstream rank_out;
    if (csv_out) {
        ln_out = open_out(dir / "lognormal_fits.csv");
        ln_out << "city_id,layer,mu,sigma2,log_likelihood,n_cells,converged,note\n";
        q_out = open_out(dir / "quintile_curves.csv");
        q_out << "city_id,layer,percent,cells,normalized\n";
        ratio_out = open_out(dir / "area_ratios.csv");
        ratio_out << "city_id,domestic,foreign\n";
        cov_out = open_out(dir / "coverage.csv");
        cov_out << "city_id,n,hotspots,coverage\n";
        rank_out = open_out(dir / "rank_exponents.csv");
        rank_out << "city_id,layer,q,c,r_squared,n_points\n";
    }
    std::map<std::size_t, std::vector<double>> coverage_by_n;

    for (const auto& cs : r.spatial) {
        const fs::path cdir = dir / cs.city_id;
        const auto id = csv::escape(cs.city_id);
        if (csv_out) {
            auto out = open_out(cdir / "density.csv");
            out << "row,col,resident,domestic,foreign,unknown,total\n";
            const auto& g = cs.field.grid();
            for (int row = 0; row < g.n_rows; ++row) {
                for (int col = 0; col < g.n_cols; ++col) {
                    if (cs.field.at(Layer::total, row, col) == 0) {
                        continue;
                    }
                    out << row << ',' << col;
                    for (Layer l : kAllLayers) {
                        out << ',' << cs.field.at(l, row, col);
                    }
                    out << '\n';
                }
            }
            auto hs = open_out(cdir / "hotspots.csv");
            hs << "rank,cells,activity,threshold,resident,domestic,foreign,unknown\n";
            for (const auto& h : cs.hotspots) {
                std::array<std::int64_t, 4> per{};
                for (const auto& c : h.cells) {
                    for (std::size_t k = 0; k < 4; ++k) {
                        per[k] += cs.field.at(kAllLayers[k], c);
                    }
                }
                hs << h.rank << ',' << h.cells.size() << ',' << h.activity << ',' << h.threshold << ',' << per[0]
                   << ',' << per[1] << ',' << per[2] << ',' << per[3] << '\n';
            }

            for (const auto& [l, f] : cs.lognormal_fits) {
                ln_out << id << ',' << to_string(l) << ',' << num(f.param("mu")) << ',' << num(f.param("sigma2"))
                       << ',' << num(f.goodness) << ',' << f.n_points << ',' << (f.converged ? "true" : "false")
                       << ',' << csv::escape(f.diagnostics.note) << '\n';
            }
            for (const auto& [l, why] : cs.lognormal_skips) {
                ln_out << id << ',' << to_string(l) << ",null,null,null,0,false," << csv::escape(why) << '\n';
            }
            for (const auto& [l, curve] : cs.quintiles) {
                for (std::size_t k = 0; k < curve.percents.size(); ++k) {
                    q_out << id << ',' << to_string(l) << ',' << curve.percents[k] << ',' << curve.cells[k] << ','
                          << num(curve.normalized[k]) << '\n';
                }
            }
            ratio_out << id << ',' << opt_num(cs.area_ratios.domestic) << ',' << opt_num(cs.area_ratios.foreign)
                      << '\n';
            for (const auto& p : cs.coverage) {
                cov_out << id << ',' << p.n << ',' << p.hotspots << ',' << num(p.coverage) << '\n';
            }
            for (const auto& [l, f] : cs.rank_fits) {
                rank_out << id << ',' << to_string(l) << ',' << num(f.param("q")) << ',' << num(f.param("c")) << ','
                         << num(f.goodness) << ',' << f.n_points << '\n';
            }
        }
        for (const auto& p : cs.coverage) {
            coverage_by_n[p.n].push_back(p.coverage);
        }
        if (formats.contains("json")) {
            write_json(cdir / "fits.json", city_fits_json(cs));
        }
        if (formats.contains("geojson")) {
            write_json(cdir / "density.geojson", density_geojson(cs.field));
            write_json(cdir / "hotspots.geojson", hotspots_geojson(cs.hotspots, cs.field.grid()));
        }
    }
    if (csv_out) {
        auto out = open_out(dir / "coverage_summary.csv");
        out << "n,cities,mean,std\n";
        for (const auto& [n, vals] : coverage_by_n) {
            double mean = 0.0;
            for (double v : vals) {
                mean += v;
            }
            mean /= static_cast<double>(vals.size());
            double var = 0.0;
            for (double v : vals) {
                var += (v - mean) * (v - mean);
            }
            var /= static_cast<double>(vals.size());
            out << n << ',' << vals.size() << ',' << num(mean) << ',' << num(std::sqrt(var)) << '\n';
        }
    }
}

} // namespace

void export_outputs(const PipelineResult& r, const fs::path& out_dir, const std::set<std::string>& formats)
{
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir)) {
        throw ConfigError("cannot create output directory '" + out_dir.string() + "'");
    }
    write_json(out_dir / "ingest_stats.json", json(r.ingest.stats));
    if (r.config.write_records) {
        write_records_csv(out_dir / "records.csv", r.ingest.records);
    }
    if (formats.contains("json")) {
        write_json(out_dir / "report.json", r.report());
    }
    if (r.reached == Stage::ingest) {
        return;
    }
    if (formats.contains("csv")) {
        write_homes_csv(out_dir / "homes.csv", r.homes);
    }
    if (r.reached == Stage::homes) {
        return;
    }
    export_flows(r, out_dir / "flows", formats);
    if (r.reached == Stage::flows) {
        return;
    }
    export_spatial(r, out_dir / "spatial", formats);
}

} // namespace geophoto
