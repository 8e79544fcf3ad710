#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "argmine/corpus.hpp"

namespace argmine {

// Where a recognized span lives inside a SentenceUnit.
struct FieldRef {
    enum class Kind { text, context_before, context_after };
    Kind kind = Kind::text;
    std::size_t index = 0;  // position inside the context list

    bool operator==(const FieldRef&) const = default;
};

struct PersonSpan {
    std::size_t start = 0;  // byte offsets into the field
    std::size_t end = 0;
    std::string surface;
    FieldRef field;
};

// Finds person mentions in one string. Returned spans are sorted by start,
// do not overlap, and carry the default (text) field; callers set `field`.
class PersonRecognizer {
public:
    virtual ~PersonRecognizer() = default;
    virtual std::vector<PersonSpan> recognize(const std::string& text) const = 0;
};

// Longest-match lookup of a fixed surface list, respecting word boundaries.
class DictionaryRecognizer final : public PersonRecognizer {
public:
    explicit DictionaryRecognizer(std::vector<std::string> surfaces);
    static DictionaryRecognizer from_file(const std::filesystem::path& path);

    std::vector<PersonSpan> recognize(const std::string& text) const override;
    const std::vector<std::string>& surfaces() const { return surfaces_; }

private:
    std::vector<std::string> surfaces_;  // longest first
};

// All spans in a unit: text, then context_before, then context_after.
std::vector<PersonSpan> recognize_unit(const SentenceUnit& u, const PersonRecognizer& recognizer);

struct ShuffleResult {
    LabeledDataset dataset;
    std::vector<std::string> pool;  // distinct surfaces, sorted
    std::size_t replaced_spans = 0;
    bool empty_pool = false;
};

// Replaces every recognized person with a name drawn uniformly from the
// dataset-wide pool; repeated surfaces inside one unit (contexts included)
// share one draw.
ShuffleResult shuffle_persons(const LabeledDataset& ds, const PersonRecognizer& recognizer,
                              std::uint64_t seed);

// Flip for/against on onion-flagged units.
LabeledDataset swap_onion(const LabeledDataset& ds);

enum class SampleMode { stratified, tfs };

std::string_view to_string(SampleMode m);
std::optional<SampleMode> parse_sample_mode(std::string_view s);

inline constexpr std::array<double, 8> kSweepProportions = {0.025, 0.05, 0.1, 0.2,
                                                             0.3,   0.5,  0.7, 1.0};

struct FewShotPlan {
    double proportion = 1.0;
    SampleMode mode = SampleMode::stratified;
    std::uint64_t seed = 0;
    std::size_t repetitions = 5;

    // True when the proportion is one of the eight sweep grid values.
    bool on_sweep_grid() const;
};

// Per-label sample sizes for the stratified rule: floor(p * n), at least 1
// for a non-empty class.
LabelCounts stratified_counts(const LabelCounts& class_sizes, double proportion);

LabeledDataset sample_stratified(const LabeledDataset& train, double proportion, std::uint64_t seed);

// Label-blind sample of floor(p * |train|) units.
LabeledDataset sample_tfs(const LabeledDataset& train, double proportion, std::uint64_t seed);

}  // namespace argmine
