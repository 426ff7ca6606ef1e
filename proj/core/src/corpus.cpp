#include "medfinder/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "medfinder/common.hpp"
#include "medfinder/rng.hpp"

namespace medfinder {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kMaxMissingFraction = 0.30;
constexpr std::size_t kMinDimension = 96;
constexpr std::size_t kMinReportWords = 5;

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

SummaryStats summarize(std::vector<double> values) {
    SummaryStats s;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    double sum = 0.0;
    for (double v : values) sum += v;
    s.average = sum / static_cast<double>(n);
    // Lower of the two middle values for even n.
    s.median = (n % 2 == 1) ? values[n / 2] : values[n / 2 - 1];
    s.min = values.front();
    s.max = values.back();
    return s;
}

void expect_keys(const ordered_json& obj, std::initializer_list<const char*> keys,
                 const std::string& context) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* k : keys)
            if (item.key() == k) { known = true; break; }
        if (!known) throw DataError("unknown key '" + item.key() + "' in " + context);
    }
    for (const char* k : keys)
        if (!obj.contains(k)) throw DataError(std::string("missing key '") + k + "' in " + context);
}

} // namespace

std::string split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
        case Split::unassigned: return "unassigned";
    }
    return "unassigned";
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "val") return Split::val;
    if (name == "test") return Split::test;
    if (name == "unassigned") return Split::unassigned;
    throw DataError("unknown split tag: " + name);
}

std::string reject_reason_name(RejectReason r) {
    switch (r) {
        case RejectReason::none: return "none";
        case RejectReason::missing: return "missing";
        case RejectReason::dimension: return "dimension";
        case RejectReason::report_length: return "report_length";
        case RejectReason::unpaired: return "unpaired";
    }
    return "none";
}

FilterDecision filter_volume(const VolumeRecord& v) {
    if (v.missing_fraction > kMaxMissingFraction) return {false, RejectReason::missing};
    if (std::min({v.width, v.height, v.depth}) < kMinDimension)
        return {false, RejectReason::dimension};
    return {true, RejectReason::none};
}

FilterDecision filter_report(const ReportRecord& r) {
    if (r.word_count < kMinReportWords) return {false, RejectReason::report_length};
    return {true, RejectReason::none};
}

std::size_t whitespace_word_count(const std::string& text) noexcept {
    std::size_t count = 0;
    bool in_word = false;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++count;
        }
    }
    return count;
}

// --- anonymization ----------------------------------------------------------

struct Anonymizer::Compiled {
    std::regex regex;
    std::string replacement; // '$' escaped so the placeholder stays literal
};

Anonymizer::Anonymizer(std::vector<AnonymizePattern> patterns)
    : patterns_(std::move(patterns)) {
    auto compiled = std::make_shared<std::vector<Compiled>>();
    compiled->reserve(patterns_.size());
    for (const AnonymizePattern& p : patterns_) {
        Compiled c;
        try {
            c.regex = std::regex(p.regex, std::regex::ECMAScript);
        } catch (const std::regex_error& e) {
            throw ConfigError("invalid anonymization regex '" + p.regex + "': " + e.what());
        }
        for (char ch : p.placeholder) {
            c.replacement += ch;
            if (ch == '$') c.replacement += '$';
        }
        compiled->push_back(std::move(c));
    }
    compiled_ = std::move(compiled);
}

std::string Anonymizer::apply(const std::string& text) const {
    std::string out = text;
    for (const Compiled& c : *compiled_)
        out = std::regex_replace(out, c.regex, c.replacement);
    return out;
}

std::vector<AnonymizePattern> load_patterns(const std::filesystem::path& path) {
    std::vector<AnonymizePattern> patterns;
    for (const std::string& line : read_lines(path)) {
        if (line.empty() || line[0] == '#') continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw ConfigError("pattern line without tab separator: " + line);
        patterns.push_back({line.substr(0, tab), line.substr(tab + 1)});
    }
    return patterns;
}

std::set<std::string> load_stopwords(const std::filesystem::path& path) {
    std::set<std::string> words;
    for (const std::string& line : read_lines(path)) {
        if (line.empty() || line[0] == '#') continue;
        std::string w = line;
        std::transform(w.begin(), w.end(), w.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        words.insert(w);
    }
    return words;
}

// --- split / stats / word frequency ------------------------------------------

void assign_splits(Manifest& m, std::uint64_t seed) {
    const std::size_t n = m.samples.size();
    if (n == 0) throw DataError("cannot split an empty manifest");
    for (const PairedSample& s : m.samples)
        if (s.split != Split::unassigned)
            throw DataError("sample already assigned to a split: " + s.id);

    // Integer floors keep the sizes exact: floor(0.7 n) = 7n/10.
    const std::size_t n_train = 7 * n / 10;
    const std::size_t n_val = n / 10;

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(derive_seed(seed, hash_string("split")));
    rng.shuffle(order);

    for (std::size_t pos = 0; pos < n; ++pos) {
        Split s = Split::test;
        if (pos < n_train) s = Split::train;
        else if (pos < n_train + n_val) s = Split::val;
        m.samples[order[pos]].split = s;
    }
}

CorpusStats corpus_stats(const Manifest& m) {
    if (m.samples.empty()) throw DataError("cannot summarize an empty manifest");
    std::vector<double> widths, heights, slices, lengths;
    widths.reserve(m.samples.size());
    heights.reserve(m.samples.size());
    slices.reserve(m.samples.size());
    lengths.reserve(m.samples.size());
    for (const PairedSample& s : m.samples) {
        widths.push_back(static_cast<double>(s.volume.width));
        heights.push_back(static_cast<double>(s.volume.height));
        slices.push_back(static_cast<double>(s.volume.depth));
        lengths.push_back(static_cast<double>(s.report.word_count));
    }
    CorpusStats stats;
    stats.width = summarize(std::move(widths));
    stats.height = summarize(std::move(heights));
    stats.slices = summarize(std::move(slices));
    stats.report_length = summarize(std::move(lengths));
    return stats;
}

std::vector<std::pair<std::string, std::size_t>> word_frequency(
    const Manifest& m, const std::set<std::string>& stopwords) {
    std::map<std::string, std::size_t> counts;
    for (const PairedSample& s : m.samples) {
        std::string word;
        auto flush = [&] {
            if (!word.empty() && !stopwords.count(word)) ++counts[word];
            word.clear();
        };
        for (unsigned char c : s.report.text) {
            if (std::isspace(c) || std::ispunct(c)) flush();
            else word += static_cast<char>(std::tolower(c));
        }
        flush();
    }
    std::vector<std::pair<std::string, std::size_t>> out(counts.begin(), counts.end());
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return out;
}

// --- manifest I/O -------------------------------------------------------------

std::string sample_to_json_line(const PairedSample& s) {
    ordered_json j;
    j["id"] = s.id;
    j["volume"] = {{"id", s.volume.id},
                   {"width", s.volume.width},
                   {"height", s.volume.height},
                   {"depth", s.volume.depth},
                   {"missing_fraction", s.volume.missing_fraction},
                   {"data_path", s.volume.data_path}};
    j["report"] = {{"id", s.report.id},
                   {"text", s.report.text},
                   {"word_count", s.report.word_count}};
    j["keywords"] = s.keywords;
    j["split"] = split_name(s.split);
    return j.dump();
}

void save_manifest(const std::filesystem::path& path, const Manifest& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write manifest: " + path.string());
    ordered_json header;
    header["schema_version"] = m.schema_version;
    out << header.dump() << '\n';
    for (const PairedSample& s : m.samples) out << sample_to_json_line(s) << '\n';
    if (!out) throw DataError("short write on manifest: " + path.string());
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open manifest: " + path.string());
    Manifest m;
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty manifest file: " + path.string());

    ordered_json header;
    try {
        header = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("bad manifest header: " + std::string(e.what()));
    }
    expect_keys(header, {"schema_version"}, "manifest header");
    m.schema_version = header["schema_version"].get<int>();
    if (m.schema_version != 1) throw DataError("unsupported manifest schema version");

    std::set<std::string> volume_ids, report_ids;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("bad manifest line " + std::to_string(line_no) + ": " + e.what());
        }
        const std::string context = "manifest line " + std::to_string(line_no);
        expect_keys(j, {"id", "volume", "report", "keywords", "split"}, context);
        expect_keys(j["volume"],
                    {"id", "width", "height", "depth", "missing_fraction", "data_path"},
                    context + " volume");
        expect_keys(j["report"], {"id", "text", "word_count"}, context + " report");

        PairedSample s;
        s.id = j["id"].get<std::string>();
        s.volume.id = j["volume"]["id"].get<std::string>();
        s.volume.width = j["volume"]["width"].get<std::size_t>();
        s.volume.height = j["volume"]["height"].get<std::size_t>();
        s.volume.depth = j["volume"]["depth"].get<std::size_t>();
        s.volume.missing_fraction = j["volume"]["missing_fraction"].get<double>();
        s.volume.data_path = j["volume"]["data_path"].get<std::string>();
        s.report.id = j["report"]["id"].get<std::string>();
        s.report.text = j["report"]["text"].get<std::string>();
        s.report.word_count = j["report"]["word_count"].get<std::size_t>();
        for (const auto& k : j["keywords"]) s.keywords.insert(k.get<std::string>());
        s.split = split_from_name(j["split"].get<std::string>());

        if (s.volume.width < 1 || s.volume.height < 1 || s.volume.depth < 1)
            throw DataError(context + ": volume dimensions must be positive");
        if (s.volume.missing_fraction < 0.0 || s.volume.missing_fraction > 1.0)
            throw DataError(context + ": missing_fraction out of [0,1]");
        if (s.report.word_count != whitespace_word_count(s.report.text))
            throw DataError(context + ": word_count does not match report text");
        if (!volume_ids.insert(s.volume.id).second)
            throw DataError(context + ": duplicate volume id " + s.volume.id);
        if (!report_ids.insert(s.report.id).second)
            throw DataError(context + ": duplicate report id " + s.report.id);

        m.samples.push_back(std::move(s));
    }

    if (!std::is_sorted(m.samples.begin(), m.samples.end(),
                        [](const PairedSample& a, const PairedSample& b) { return a.id < b.id; }))
        throw DataError("manifest samples not sorted by id: " + path.string());
    return m;
}

} // namespace medfinder
