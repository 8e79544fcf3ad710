#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "argmine/label.hpp"

namespace argmine {

enum class Split { train, dev, test };

std::string_view to_string(Split s);
std::optional<Split> parse_split(std::string_view s);

// One coding unit: the target sentence with up to two neighbours per side.
struct SentenceUnit {
    std::string unit_id;
    std::string doc_id;
    std::size_t sent_index = 0;
    std::string text;
    std::vector<std::string> context_before;  // reading order, nearest last
    std::vector<std::string> context_after;   // reading order, nearest first
    Label label = Label::no_stance;
    bool onion = false;
    std::optional<std::map<std::string, Label>> coder_labels;
    std::optional<Split> split;

    bool operator==(const SentenceUnit&) const = default;
};

struct LabeledDataset {
    std::vector<SentenceUnit> units;
    std::map<std::string, std::string> metadata;

    std::size_t size() const { return units.size(); }
    bool empty() const { return units.empty(); }
    bool operator==(const LabeledDataset&) const = default;
};

using LabelCounts = std::array<std::size_t, kLabelCount>;

LabelCounts count_labels(const LabeledDataset& ds);

// Throws ValidationError naming the unit.
void validate_unit(const SentenceUnit& u);
// Unit invariants, unique ids, and splits either all assigned or none.
void validate_dataset(const LabeledDataset& ds);

// Dataset interchange: one JSON object per line.
LabeledDataset parse_dataset(std::istream& in);
LabeledDataset load_dataset(const std::filesystem::path& path);
void write_dataset(std::ostream& out, const LabeledDataset& ds);
void save_dataset(const std::filesystem::path& path, const LabeledDataset& ds);

// Units at the given ascending indices, metadata copied.
LabeledDataset subset(const LabeledDataset& ds, const std::vector<std::size_t>& indices);
LabeledDataset units_in_split(const LabeledDataset& ds, Split s);

// Label chosen by at least `quorum` coders and by strictly more coders than
// any other label; ties and sub-quorum pluralities give nullopt.
std::optional<Label> aggregate_majority(const std::map<std::string, Label>& coder_labels,
                                        std::size_t quorum);

// --- inter-coder reliability -------------------------------------------------

// Rows are coders, columns units. Categories are free strings so the same
// routine serves the relevance step and the claim/argument step.
struct ReliabilityMatrix {
    std::vector<std::string> coders;
    std::vector<std::vector<std::optional<std::string>>> values;
};

struct AlphaResult {
    double alpha = 1.0;
    bool degenerate = false;  // zero expected disagreement; alpha defined as 1
    std::size_t pairable_values = 0;
};

// Nominal Krippendorff's alpha via the coincidence matrix.
AlphaResult krippendorff_alpha(const ReliabilityMatrix& m);

// CSV, one coder per row: coder id, then one cell per unit (empty = missing).
ReliabilityMatrix parse_reliability_csv(std::istream& in);
ReliabilityMatrix load_reliability_csv(const std::filesystem::path& path);

// --- splitting and downsampling ---------------------------------------------

struct SplitRatios {
    double train = 0.7;
    double dev = 0.1;
    double test = 0.2;
};

// Stratified by label: dev and test take floor(ratio * class size), the
// leftovers go to train.
LabeledDataset split_dataset(const LabeledDataset& ds, SplitRatios ratios, std::uint64_t seed);

struct DownsampleResult {
    LabeledDataset dataset;
    std::size_t target = 0;    // smallest n with n / (n + k) >= share
    std::size_t kept = 0;
    bool shortfall = false;    // fewer no_stance units available than target
};

DownsampleResult downsample_no_stance(const LabeledDataset& ds, double share, std::uint64_t seed);

// Smallest n >= 0 with n / (n + stance_count) >= share.
std::size_t no_stance_target(std::size_t stance_count, double share);

// --- near-domain (topic-tagged 3-class) data ---------------------------------

struct StanceUnit {
    std::string topic;
    std::string text;
    Stance stance = Stance::neutral;
    std::optional<Split> split;
};

// Tab-separated with a header row; reads the `topic`, `sentence`,
// `annotation` and optional `set` columns. Annotations Argument_for,
// Argument_against and NoArgument map to the three stances.
std::vector<StanceUnit> parse_stance_tsv(std::istream& in);
std::vector<StanceUnit> load_stance_tsv(const std::filesystem::path& path);

}  // namespace argmine
