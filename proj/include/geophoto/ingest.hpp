#pragma once

#include "geophoto/time.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace geophoto {

/// The dataset's own per-file tag.
enum class SourceLabel { resident, tourist, unknown };

std::string_view to_string(SourceLabel label);
std::optional<SourceLabel> parse_source_label(std::string_view text);

struct PhotoRecord {
    std::string photo_id; // may be empty; dedup then falls back to the content key
    std::string user_id;
    Instant taken_at;
    double lat{0.0};
    double lon{0.0};
    std::string location_id;
    SourceLabel source_label{SourceLabel::unknown};

    bool operator==(const PhotoRecord&) const = default;
};

/// Anything before this is treated as a bad camera clock, not a real capture time.
inline const Instant kEarliestValidInstant = make_instant(1990, 1, 1);

enum class RecordErrorKind { malformed, bad_timestamp, bad_coordinate };

struct RecordError {
    RecordErrorKind kind;
    std::size_t line{0};
    std::string message;
};

using ParseOutcome = std::variant<PhotoRecord, RecordError>;

/// Parses one data row `photo_id,user_id,taken_at,lat,lon[,url]`.
ParseOutcome parse_record(std::string_view line, std::string_view location_id, SourceLabel label,
                          std::size_t line_no = 0);

struct IngestStats {
    std::size_t records_read{0};
    std::size_t invalid_rows_removed{0}; // malformed rows and out-of-range coordinates
    std::size_t bad_timestamps_removed{0};
    std::size_t duplicates_removed{0};
    std::size_t out_of_window_removed{0};
    std::size_t records_kept{0};

    bool balanced() const
    {
        return records_kept + duplicates_removed + bad_timestamps_removed + out_of_window_removed
                   + invalid_rows_removed
               == records_read;
    }
};

void to_json(nlohmann::json& j, const IngestStats& s);
void from_json(const nlohmann::json& j, IngestStats& s);

/// Key used for duplicate detection: photo_id when present, else the
/// (user, instant, lat, lon) quadruple.
std::string dedup_key(const PhotoRecord& r);

/// Keeps the first record seen per dedup key. Memory grows with the number of
/// distinct keys, not with the number of records pushed through.
class Deduplicator {
public:
    bool admit(const PhotoRecord& r);
    std::size_t removed() const { return removed_; }
    std::size_t distinct() const { return seen_.size(); }

private:
    std::unordered_set<std::string> seen_;
    std::size_t removed_{0};
};

struct DedupResult {
    std::vector<PhotoRecord> records;
    std::size_t duplicates_removed{0};
};

DedupResult deduplicate(std::vector<PhotoRecord> records);

struct WindowResult {
    std::vector<PhotoRecord> records;
    std::size_t out_of_window_removed{0};
};

WindowResult filter_window(std::vector<PhotoRecord> records, const TimeWindow& window);

struct InputFile {
    std::filesystem::path path;
    std::string location_id;
    SourceLabel label{SourceLabel::unknown};
};

/// Splits `<location_id>_<label>.csv`; nullopt when the name does not match.
std::optional<InputFile> classify_input_path(const std::filesystem::path& path);

/// All matching CSV files under `dir`, sorted by file name. Throws DataError
/// when the directory is missing or holds no input files.
std::vector<InputFile> discover_inputs(const std::filesystem::path& dir);

struct FileIssue {
    std::string file;
    RecordError error;
};

struct IngestOptions {
    TimeWindow window{make_instant(2007, 1, 1), make_instant(2010, 1, 1)};
    unsigned workers{1};
    std::size_t max_reported_issues{50};
};

struct IngestResult {
    std::vector<PhotoRecord> records; // stable-sorted by (location_id, photo_id)
    IngestStats stats;
    std::vector<FileIssue> issues; // first max_reported_issues row errors
};

/// Parse (parallel per file) -> dedup (input order: file name, then line) ->
/// window filter -> stable sort. Output is independent of the worker count.
IngestResult ingest_files(const std::vector<InputFile>& files, const IngestOptions& options);

void write_records_csv(const std::filesystem::path& path, const std::vector<PhotoRecord>& records);

} // namespace geophoto
