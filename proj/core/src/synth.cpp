#include "medfinder/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "medfinder/common.hpp"
#include "medfinder/rng.hpp"
#include "medfinder/vision.hpp"

namespace medfinder {

namespace {

const std::vector<std::string> kFindingTerms = {
    "atelectasis",  "consolidation", "adenopathy",   "effusion",     "nodule",
    "emphysema",    "fibrosis",      "pneumothorax", "cardiomegaly", "granuloma",
    "bronchiectasis", "opacity",     "infiltrate",   "calcification", "edema",
    "mass",         "cavitation",    "thickening",   "scarring",     "stenosis",
    "aneurysm",     "embolism",      "hernia",       "cyst",         "lesion",
    "collapse",     "hyperinflation", "honeycombing", "bulla",       "abscess",
    "pneumonia",    "metastasis",    "fracture",     "sclerosis",    "dilation",
    "congestion"};

const std::vector<std::string> kFillerWords = {
    "the",  "with", "of",   "in",  "mild",  "right", "left",  "lower",
    "upper", "lobe", "seen", "and", "noted", "small", "focal", "chronic"};

std::string make_id(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "p%04zu", i);
    return buf;
}

Volume pattern_volume(const std::vector<std::string>& terms, const SynthConfig& cfg) {
    const std::size_t g = cfg.pattern_grid;
    Volume coarse(g, g, g, 0.0f);
    const double scale =
        cfg.pattern_strength / std::sqrt(static_cast<double>(std::max<std::size_t>(1, terms.size())));
    for (const std::string& term : terms) {
        Rng basis_rng(derive_seed(derive_seed(cfg.seed, hash_string("basis")), hash_string(term)));
        for (float& v : coarse.voxels)
            v = static_cast<float>(static_cast<double>(v) + scale * basis_rng.normal());
    }
    if (cfg.volume_dim != g)
        coarse = resize_trilinear(coarse, cfg.volume_dim, cfg.volume_dim, cfg.volume_dim);
    return coarse;
}

} // namespace

SynthCorpus generate_corpus(const SynthConfig& cfg) {
    if (cfg.num_pairs < 1) throw ConfigError("num_pairs must be >= 1");
    if (cfg.signal_words < 1 || cfg.signal_words > kFindingTerms.size())
        throw ConfigError("signal_words out of range");
    if (cfg.words_per_report < cfg.signal_words)
        throw ConfigError("words_per_report must cover the signal words");
    if (cfg.pattern_grid < 1 || cfg.volume_dim < 1)
        throw ConfigError("volume dims must be >= 1");

    SynthCorpus corpus;
    Rng rng(derive_seed(cfg.seed, hash_string("corpus")));

    // Distinct term sets keep every pair separable from the others.
    std::set<std::vector<std::string>> used;
    for (std::size_t i = 0; i < cfg.num_pairs; ++i) {
        std::vector<std::string> terms;
        for (int attempt = 0; attempt < 1000; ++attempt) {
            std::set<std::size_t> picks;
            while (picks.size() < cfg.signal_words)
                picks.insert(static_cast<std::size_t>(rng.uniform_u64(kFindingTerms.size())));
            terms.clear();
            for (std::size_t p : picks) terms.push_back(kFindingTerms[p]);
            if (used.insert(terms).second) break;
            terms.clear();
        }
        if (terms.empty())
            throw DataError("could not draw a distinct term set; lower num_pairs");

        std::vector<std::string> words = terms;
        while (words.size() < cfg.words_per_report)
            words.push_back(kFillerWords[rng.uniform_u64(kFillerWords.size())]);
        rng.shuffle(words);
        std::string report;
        for (std::size_t w = 0; w < words.size(); ++w) {
            if (w) report += ' ';
            report += words[w];
        }

        SynthSample sample;
        sample.id = make_id(i);
        sample.report = std::move(report);
        if (cfg.keywords) sample.keywords = terms;
        Rng noise_rng(derive_seed(derive_seed(cfg.seed, hash_string("noise")), i));
        sample.volume = pattern_volume(terms, cfg);
        if (cfg.noise_sigma > 0.0)
            for (float& v : sample.volume.voxels)
                v = static_cast<float>(static_cast<double>(v)
                                       + noise_rng.normal(0.0, cfg.noise_sigma));
        corpus.samples.push_back(std::move(sample));
    }

    // Planted violations, appended after the valid pairs.
    const std::string base_report = "no acute cardiopulmonary findings are seen today";
    std::size_t v = 0;
    for (std::size_t i = 0; i < cfg.violate_missing; ++i, ++v) {
        SynthSample s;
        s.id = "zbad_missing_" + std::to_string(i);
        s.report = base_report;
        s.volume = Volume(cfg.volume_dim, cfg.volume_dim, cfg.volume_dim, 0.0f);
        Rng nan_rng(derive_seed(cfg.seed, hash_string("nan") + v));
        const std::size_t target = s.volume.size() * 35 / 100 + 1; // > 30%
        std::set<std::size_t> holes;
        while (holes.size() < target)
            holes.insert(static_cast<std::size_t>(nan_rng.uniform_u64(s.volume.size())));
        for (std::size_t h : holes) s.volume.voxels[h] = std::nanf("");
        corpus.samples.push_back(std::move(s));
        corpus.violator_ids.push_back(corpus.samples.back().id);
    }
    for (std::size_t i = 0; i < cfg.violate_dims; ++i, ++v) {
        SynthSample s;
        s.id = "zbad_dims_" + std::to_string(i);
        s.report = base_report;
        s.volume = Volume(95, std::max<std::size_t>(cfg.volume_dim, 96),
                          std::max<std::size_t>(cfg.volume_dim, 96), 0.0f);
        corpus.samples.push_back(std::move(s));
        corpus.violator_ids.push_back(corpus.samples.back().id);
    }
    for (std::size_t i = 0; i < cfg.violate_report; ++i, ++v) {
        SynthSample s;
        s.id = "zbad_report_" + std::to_string(i);
        s.report = "no acute findings";
        s.volume = Volume(std::max<std::size_t>(cfg.volume_dim, 96),
                          std::max<std::size_t>(cfg.volume_dim, 96),
                          std::max<std::size_t>(cfg.volume_dim, 96), 0.0f);
        corpus.samples.push_back(std::move(s));
        corpus.violator_ids.push_back(corpus.samples.back().id);
    }

    std::sort(corpus.samples.begin(), corpus.samples.end(),
              [](const SynthSample& a, const SynthSample& b) { return a.id < b.id; });
    return corpus;
}

SynthCorpus generate_raw_corpus(const std::filesystem::path& dir, const SynthConfig& cfg) {
    std::filesystem::create_directories(dir);
    SynthCorpus corpus = generate_corpus(cfg);
    for (const SynthSample& s : corpus.samples) {
        save_volume(dir / (s.id + ".vol"), s.volume);
        std::ofstream txt(dir / (s.id + ".txt"), std::ios::binary);
        if (!txt) throw DataError("cannot write report for " + s.id);
        txt << s.report << '\n';
        if (!s.keywords.empty()) {
            std::ofstream kw(dir / (s.id + ".keywords"), std::ios::binary);
            if (!kw) throw DataError("cannot write keywords for " + s.id);
            for (const std::string& k : s.keywords) kw << k << '\n';
        }
    }
    return corpus;
}

} // namespace medfinder
