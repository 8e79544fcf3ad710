#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "argmine/corpus.hpp"

namespace argmine {

// Generator for seeded, separable toy corpora. Each label owns a small set
// of cue words; a unit's target sentence mixes cue words of its label with
// shared filler, so a bag-of-words reading of the target separates classes.
struct SyntheticConfig {
    std::size_t units = 500;
    std::uint64_t seed = 0;
    // Relative class frequencies in label order; equal by default.
    std::array<double, kLabelCount> class_weights = {1, 1, 1, 1, 1};
    std::size_t cues_per_unit = 2;
    std::size_t min_filler = 3;
    std::size_t max_filler = 6;
    bool with_context = true;
    double person_rate = 0.3;  // share of units naming a person
    double onion_rate = 0.1;   // share of stance units flagged onion
    std::size_t units_per_document = 10;
};

LabeledDataset synthesize_dataset(const SyntheticConfig& cfg);

// Topic-tagged 3-class stance units with the same cue-word construction.
std::vector<StanceUnit> synthesize_stance(std::size_t units, std::uint64_t seed);

// Person names the generator inserts, for a DictionaryRecognizer.
const std::vector<std::string>& synthetic_person_names();

// Every word the generators can emit.
std::vector<std::string> synthetic_words();

}  // namespace argmine
