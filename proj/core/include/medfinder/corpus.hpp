#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace medfinder {

struct VolumeRecord {
    std::string id;
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t depth = 0;
    double missing_fraction = 0.0;
    std::string data_path; // relative to the manifest file's directory
};

struct ReportRecord {
    std::string id;
    std::string text;
    std::size_t word_count = 0; // whitespace-delimited tokens of `text`
};

enum class Split { unassigned, train, val, test };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

struct PairedSample {
    std::string id;
    VolumeRecord volume;
    ReportRecord report;
    std::set<std::string> keywords;
    Split split = Split::unassigned;
};

struct Manifest {
    int schema_version = 1;
    std::vector<PairedSample> samples; // sorted by sample id
};

// --- filtering ------------------------------------------------------------

enum class RejectReason { none, missing, dimension, report_length, unpaired };

std::string reject_reason_name(RejectReason r);

struct FilterDecision {
    bool keep = true;
    RejectReason reason = RejectReason::none;
};

// Reject iff missing_fraction > 0.30 (strictly) or any dimension < 96.
FilterDecision filter_volume(const VolumeRecord& v);

// Reject iff the report has fewer than five whitespace-delimited words.
FilterDecision filter_report(const ReportRecord& r);

std::size_t whitespace_word_count(const std::string& text) noexcept;

// --- anonymization ---------------------------------------------------------

struct AnonymizePattern {
    std::string regex;       // ECMAScript syntax
    std::string placeholder; // substituted literally
};

// Compiles patterns once; throws ConfigError on an invalid regex.
class Anonymizer {
public:
    explicit Anonymizer(std::vector<AnonymizePattern> patterns);
    std::string apply(const std::string& text) const;

private:
    struct Compiled;
    std::vector<AnonymizePattern> patterns_;
    std::shared_ptr<const std::vector<Compiled>> compiled_;
};

// Pattern file: one entry per line, "regex<TAB>placeholder", UTF-8.
// Blank lines and lines starting with '#' are skipped.
std::vector<AnonymizePattern> load_patterns(const std::filesystem::path& path);

// Stopword file: one word per line, UTF-8.
std::set<std::string> load_stopwords(const std::filesystem::path& path);

// --- split / stats / word frequency ----------------------------------------

// Assigns train/val/test tags: |train| = floor(0.7 n), |val| = floor(0.1 n),
// the remainder goes to test. Deterministic in the seed. All samples must be
// unassigned on entry; throws DataError on an empty manifest.
void assign_splits(Manifest& m, std::uint64_t seed);

struct SummaryStats {
    double average = 0.0;
    double median = 0.0; // lower-of-two convention for even counts
    double min = 0.0;
    double max = 0.0;
};

struct CorpusStats {
    SummaryStats width;
    SummaryStats height;
    SummaryStats slices;
    SummaryStats report_length;
};

CorpusStats corpus_stats(const Manifest& m);

// Case-folded, stopword-filtered counts over all report texts, descending
// by count with lexicographic tie-break.
std::vector<std::pair<std::string, std::size_t>> word_frequency(
    const Manifest& m, const std::set<std::string>& stopwords);

// --- manifest I/O -----------------------------------------------------------

// JSON Lines: a {"schema_version": 1} header line, then one PairedSample per
// line with keys in fixed order (id, volume, report, keywords, split).
void save_manifest(const std::filesystem::path& path, const Manifest& m);
Manifest load_manifest(const std::filesystem::path& path);

// Serialized form of one sample (exact line written by save_manifest).
std::string sample_to_json_line(const PairedSample& s);

} // namespace medfinder
