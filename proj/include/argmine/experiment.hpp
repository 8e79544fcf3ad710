#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "argmine/evaluation.hpp"
#include "argmine/preprocess.hpp"
#include "argmine/training.hpp"

namespace argmine {

enum class PersonsCondition { original, shuffled };
enum class LabelsCondition { original, onion };

std::string_view to_string(PersonsCondition c);
std::string_view to_string(LabelsCondition c);

// Everything one experiment needs. Read from a flat `key = value` file;
// command-line flags override single keys.
struct ExperimentSpec {
    std::filesystem::path dataset;
    std::filesystem::path persons_file;   // one name per line; needed for persons=shuffled
    std::filesystem::path near_domain;    // stance TSV; needed for *_sam variants
    std::filesystem::path vocab_file;     // optional; otherwise built from the data
    std::filesystem::path out = "runs";

    PersonsCondition persons = PersonsCondition::original;
    LabelsCondition labels = LabelsCondition::original;
    Variant variant = Variant::adapter;
    std::string pvp = "naive";

    std::vector<double> proportions = {1.0};
    SampleMode mode = SampleMode::stratified;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::uint64_t seed = 42;  // data preparation and backbone

    std::optional<double> no_stance_share;
    SplitRatios split;

    // Miniature backbone. The random stand-in needs a larger weight scale
    // than a pretrained encoder's 0.02 to pass content through at H = 32,
    // and small position embeddings so frozen features stay close to a bag
    // of words.
    std::size_t hidden = 32;
    std::size_t layers = 2;
    std::size_t heads = 2;
    std::size_t ffn = 64;
    std::size_t max_length = 128;
    std::size_t reduction_factor = 16;
    double init_std = 0.2;
    double position_init_std = 0.02;  // 0: same as init_std

    TrainConfig train;
    TrainConfig pretrain;

    std::size_t jobs = 1;

    // The prepared split and run directories.
    std::filesystem::path prepared_dir() const { return out / "prepared"; }
    std::filesystem::path runs_dir() const { return out / "runs"; }
    std::filesystem::path report_dir() const { return out / "report"; }
};

// `key = value` lines; '#' starts a comment. Duplicate keys are an error.
std::map<std::string, std::string> parse_key_values(std::istream& in);
std::map<std::string, std::string> load_key_values(const std::filesystem::path& path);

// Unknown keys and malformed values raise ConfigError. Hyperparameters
// default per variant and are then overridden by explicit keys.
ExperimentSpec spec_from_key_values(const std::map<std::string, std::string>& kv);
// The resolved spec as key-value text, accepted back by spec_from_key_values.
std::map<std::string, std::string> spec_to_key_values(const ExperimentSpec& spec);
void write_key_values(std::ostream& out, const std::map<std::string, std::string>& kv);

struct PrepareSummary {
    LabelCounts before{};
    LabelCounts after{};
    std::size_t downsample_target = 0;
    bool downsample_shortfall = false;
    std::size_t replaced_spans = 0;
    LabelCounts onion_flips{};  // per original label
};

// Downsample, split on the original labels, then apply the person shuffle
// and the onion swap. Writes train/dev/test JSONL, vocab.txt and
// manifest.json under prepared_dir().
PrepareSummary cmd_prepare(const ExperimentSpec& spec);

struct Cell {
    double proportion = 1.0;
    std::uint64_t seed = 0;
};

std::vector<Cell> sweep_cells(const ExperimentSpec& spec);
std::filesystem::path cell_dir(const ExperimentSpec& spec, const Cell& c);
bool cell_complete(const ExperimentSpec& spec, const Cell& c);

struct CellResult {
    MetricsTable metrics;
    MetricsTable stance_metrics;
    ErrorBreakdown errors;
    TrainLog log;
    std::size_t checkpoint_bytes = 0;
};

// Sample, train, evaluate on the fixed test split and persist the run
// report. The completion marker is written last.
CellResult run_cell(const ExperimentSpec& spec, const Cell& c);

// Restores a finished cell's checkpoint into a fresh assembly and scores
// the requested split.
MetricsTable cmd_evaluate(const ExperimentSpec& spec, const Cell& c, Split split);

struct SweepOutcome {
    std::size_t cells = 0;
    std::size_t skipped = 0;  // already complete
    std::size_t failed = 0;
    std::vector<std::string> failures;

    bool ok() const { return failed == 0; }
};

// Runs every incomplete cell in a forked worker, at most spec.jobs at a
// time, then writes the report.
SweepOutcome cmd_sweep(const ExperimentSpec& spec);

struct ReportSummary {
    std::size_t runs = 0;
    std::size_t aggregated_groups = 0;
};

// Collects run reports under `out` into report/runs.csv,
// report/aggregate.csv, report/stance_runs.csv and report/feasibility.csv.
ReportSummary cmd_report(const std::filesystem::path& out);

struct RunRow {
    RunKey key;
    MetricsTable metrics;
};

std::vector<RunRow> read_metrics_csv(std::istream& in);

// One row per (variant, persons, labels, proportion) with mean and sample
// standard deviation per class F1, macro-F1 and accuracy. Groups with a single run are written with an empty std.
void write_aggregate_csv(std::ostream& out, const std::vector<RunRow>& rows,
                         const std::vector<std::string>& class_names);

void write_stance_tsv(std::ostream& out, const std::vector<StanceUnit>& units);

}  // namespace argmine
