#include "geophoto/ingest.hpp"

#include "geophoto/csv.hpp"
#include "geophoto/error.hpp"
#include "geophoto/parallel.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

namespace geophoto {

namespace fs = std::filesystem;

std::string_view to_string(SourceLabel label)
{
    switch (label) {
    case SourceLabel::resident:
        return "resident";
    case SourceLabel::tourist:
        return "tourist";
    case SourceLabel::unknown:
        return "unknown";
    }
    return "unknown";
}

std::optional<SourceLabel> parse_source_label(std::string_view text)
{
    if (text == "resident") {
        return SourceLabel::resident;
    }
    if (text == "tourist") {
        return SourceLabel::tourist;
    }
    if (text == "unknown") {
        return SourceLabel::unknown;
    }
    return std::nullopt;
}

ParseOutcome parse_record(std::string_view line, std::string_view location_id, SourceLabel label,
                          std::size_t line_no)
{
    auto fields = csv::split(line);
    if (fields.size() != 5 && fields.size() != 6) {
        return RecordError{RecordErrorKind::malformed, line_no,
                           "expected 5 or 6 fields, got " + std::to_string(fields.size())};
    }
    if (fields[1].empty()) {
        return RecordError{RecordErrorKind::malformed, line_no, "empty user_id"};
    }

    const auto taken = parse_instant(fields[2]);
    if (!taken || *taken < kEarliestValidInstant) {
        return RecordError{RecordErrorKind::bad_timestamp, line_no, "bad timestamp '" + fields[2] + "'"};
    }

    double lat = 0.0;
    double lon = 0.0;
    try {
        lat = csv::parse_double(fields[3], "lat");
        lon = csv::parse_double(fields[4], "lon");
    } catch (const DataError& e) {
        return RecordError{RecordErrorKind::malformed, line_no, e.what()};
    }
    if (lat < -90.0 || lat > 90.0 || lon < -180.0 || lon > 180.0) {
        return RecordError{RecordErrorKind::bad_coordinate, line_no,
                           "coordinate out of range (" + fields[3] + ", " + fields[4] + ")"};
    }

    PhotoRecord r;
    r.photo_id = std::move(fields[0]);
    r.user_id = std::move(fields[1]);
    r.taken_at = *taken;
    r.lat = lat;
    r.lon = lon;
    r.location_id = std::string(location_id);
    r.source_label = label;
    return r;
}

void to_json(nlohmann::json& j, const IngestStats& s)
{
    j = nlohmann::json{{"records_read", s.records_read},
                       {"invalid_rows_removed", s.invalid_rows_removed},
                       {"bad_timestamps_removed", s.bad_timestamps_removed},
                       {"duplicates_removed", s.duplicates_removed},
                       {"out_of_window_removed", s.out_of_window_removed},
                       {"records_kept", s.records_kept}};
}

void from_json(const nlohmann::json& j, IngestStats& s)
{
    j.at("records_read").get_to(s.records_read);
    j.at("invalid_rows_removed").get_to(s.invalid_rows_removed);
    j.at("bad_timestamps_removed").get_to(s.bad_timestamps_removed);
    j.at("duplicates_removed").get_to(s.duplicates_removed);
    j.at("out_of_window_removed").get_to(s.out_of_window_removed);
    j.at("records_kept").get_to(s.records_kept);
}

std::string dedup_key(const PhotoRecord& r)
{
    if (!r.photo_id.empty()) {
        return "p\x1f" + r.photo_id;
    }
    return "q\x1f" + r.user_id + '\x1f' + std::to_string(r.taken_at.seconds) + '\x1f'
           + csv::format_double(r.lat) + '\x1f' + csv::format_double(r.lon);
}

bool Deduplicator::admit(const PhotoRecord& r)
{
    if (seen_.insert(dedup_key(r)).second) {
        return true;
    }
    ++removed_;
    return false;
}

DedupResult deduplicate(std::vector<PhotoRecord> records)
{
    Deduplicator dedup;
    DedupResult out;
    out.records.reserve(records.size());
    for (auto& r : records) {
        if (dedup.admit(r)) {
            out.records.push_back(std::move(r));
        }
    }
    out.duplicates_removed = dedup.removed();
    return out;
}

WindowResult filter_window(std::vector<PhotoRecord> records, const TimeWindow& window)
{
    WindowResult out;
    out.records.reserve(records.size());
    for (auto& r : records) {
        if (window.contains(r.taken_at)) {
            out.records.push_back(std::move(r));
        } else {
            ++out.out_of_window_removed;
        }
    }
    return out;
}

std::optional<InputFile> classify_input_path(const fs::path& path)
{
    if (path.extension() != ".csv") {
        return std::nullopt;
    }
    const std::string stem = path.stem().string();
    const auto us = stem.rfind('_');
    if (us == std::string::npos || us == 0) {
        return std::nullopt;
    }
    const auto label = parse_source_label(std::string_view(stem).substr(us + 1));
    if (!label) {
        return std::nullopt;
    }
    return InputFile{path, stem.substr(0, us), *label};
}

std::vector<InputFile> discover_inputs(const fs::path& dir)
{
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) {
        throw DataError("no input files: '" + dir.string() + "' is not a directory");
    }
    std::vector<InputFile> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) {
            continue;
        }
        if (auto f = classify_input_path(entry.path())) {
            files.push_back(std::move(*f));
        }
    }
    if (files.empty()) {
        throw DataError("no input files in '" + dir.string() + "'");
    }
    std::sort(files.begin(), files.end(), [](const InputFile& a, const InputFile& b) {
        return a.path.filename().string() < b.path.filename().string();
    });
    return files;
}

namespace {

struct ParsedFile {
    std::vector<PhotoRecord> records;
    std::size_t rows{0};
    std::size_t invalid{0};
    std::size_t bad_timestamps{0};
    std::vector<RecordError> errors;
};

constexpr std::string_view kHeaderPrefix = "photo_id,user_id,taken_at,lat,lon";

ParsedFile parse_file(const InputFile& file, std::size_t max_errors)
{
    std::ifstream in(file.path);
    if (!in) {
        throw DataError("cannot open input file '" + file.path.string() + "'");
    }
    ParsedFile out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line_no == 1) {
            if (line.rfind(kHeaderPrefix, 0) != 0) {
                throw DataError(file.path.string() + ":1: unexpected header '" + line + "'");
            }
            continue;
        }
        if (line.empty()) {
            continue;
        }
        ++out.rows;
        auto outcome = parse_record(line, file.location_id, file.label, line_no);
        if (auto* rec = std::get_if<PhotoRecord>(&outcome)) {
            out.records.push_back(std::move(*rec));
            continue;
        }
        auto& err = std::get<RecordError>(outcome);
        if (err.kind == RecordErrorKind::bad_timestamp) {
            ++out.bad_timestamps;
        } else {
            ++out.invalid;
        }
        if (out.errors.size() < max_errors) {
            out.errors.push_back(std::move(err));
        }
    }
    return out;
}

} // namespace

IngestResult ingest_files(const std::vector<InputFile>& files, const IngestOptions& options)
{
    IngestResult result;
    Deduplicator dedup;
    const std::size_t batch = std::max<std::size_t>(1, options.workers);

    // Files are parsed a batch at a time so that at most `batch` raw files are
    // held in memory; dedup walks them strictly in file order.
    for (std::size_t begin = 0; begin < files.size(); begin += batch) {
        const std::size_t end = std::min(files.size(), begin + batch);
        std::vector<ParsedFile> parsed(end - begin);
        parallel_for(parsed.size(), options.workers, [&](std::size_t i) {
            parsed[i] = parse_file(files[begin + i], options.max_reported_issues);
        });
        for (std::size_t i = 0; i < parsed.size(); ++i) {
            auto& pf = parsed[i];
            result.stats.records_read += pf.rows;
            result.stats.invalid_rows_removed += pf.invalid;
            result.stats.bad_timestamps_removed += pf.bad_timestamps;
            for (auto& e : pf.errors) {
                if (result.issues.size() < options.max_reported_issues) {
                    result.issues.push_back({files[begin + i].path.filename().string(), std::move(e)});
                }
            }
            for (auto& r : pf.records) {
                if (!dedup.admit(r)) {
                    continue;
                }
                if (!options.window.contains(r.taken_at)) {
                    ++result.stats.out_of_window_removed;
                    continue;
                }
                result.records.push_back(std::move(r));
            }
        }
    }
    result.stats.duplicates_removed = dedup.removed();
    result.stats.records_kept = result.records.size();

    std::stable_sort(result.records.begin(), result.records.end(),
                     [](const PhotoRecord& a, const PhotoRecord& b) {
                         if (a.location_id != b.location_id) {
                             return a.location_id < b.location_id;
                         }
                         return a.photo_id < b.photo_id;
                     });
    return result;
}

void write_records_csv(const fs::path& path, const std::vector<PhotoRecord>& records)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write '" + path.string() + "'");
    }
    out << "photo_id,user_id,taken_at,lat,lon,location_id,source_label\n";
    for (const auto& r : records) {
        out << csv::escape(r.photo_id) << ',' << csv::escape(r.user_id) << ','
            << format_instant(r.taken_at) << ',' << csv::format_double(r.lat) << ','
            << csv::format_double(r.lon) << ',' << csv::escape(r.location_id) << ','
            << to_string(r.source_label) << '\n';
    }
}

} // namespace geophoto
