#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "medfinder/volume.hpp"

namespace medfinder {

// Synthetic paired corpus with a planted text-image correlation: every report
// names a few "finding" terms, and the paired volume is a superposition of a
// fixed random basis pattern per term, so the pairing is learnable.
struct SynthConfig {
    std::size_t num_pairs = 64;
    std::size_t signal_words = 3;      // finding terms per report
    std::size_t words_per_report = 10; // including filler words
    std::size_t volume_dim = 96;       // cubic output volumes
    std::size_t pattern_grid = 16;     // resolution the patterns live at
    double pattern_strength = 1.0;
    double noise_sigma = 0.05;
    std::uint64_t seed = 7;
    bool keywords = true; // write finding terms as keyword labels

    // Extra invalid samples for exercising curation.
    std::size_t violate_missing = 0;
    std::size_t violate_dims = 0;
    std::size_t violate_report = 0;
};

struct SynthSample {
    std::string id;
    std::string report;
    std::vector<std::string> keywords;
    Volume volume;
};

struct SynthCorpus {
    std::vector<SynthSample> samples;      // valid pairs, ids sorted
    std::vector<std::string> violator_ids; // ids of planted invalid samples
};

SynthCorpus generate_corpus(const SynthConfig& cfg);

// Writes <id>.vol, <id>.txt and (optionally) <id>.keywords per sample.
SynthCorpus generate_raw_corpus(const std::filesystem::path& dir, const SynthConfig& cfg);

} // namespace medfinder
