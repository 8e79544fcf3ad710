#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "argmine/label.hpp"

namespace argmine {

// gold x predicted counts over `classes` categories.
struct Confusion {
    std::size_t classes = 0;
    std::vector<std::size_t> counts;  // row-major

    explicit Confusion(std::size_t n = kLabelCount) : classes(n), counts(n * n, 0) {}

    std::size_t& at(std::size_t gold, std::size_t pred) { return counts[gold * classes + pred]; }
    std::size_t at(std::size_t gold, std::size_t pred) const { return counts[gold * classes + pred]; }
    std::size_t total() const;
    std::size_t trace() const;

    bool operator==(const Confusion&) const = default;
};

Confusion confusion(const std::vector<Label>& gold, const std::vector<Label>& pred);
Confusion confusion(const std::vector<std::size_t>& gold, const std::vector<std::size_t>& pred,
                    std::size_t classes);

struct MetricsTable {
    std::vector<double> precision;
    std::vector<double> recall;
    std::vector<double> f1;
    std::vector<std::size_t> support;
    // set where a zero denominator forced the value to 0
    std::vector<bool> precision_undefined;
    std::vector<bool> recall_undefined;
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    bool has_zero_support = false;

    std::size_t classes() const { return f1.size(); }
};

MetricsTable metrics(const Confusion& c);

Stance collapse_stance(Label l);
// 5-class counts folded onto for / against / no_stance.
Confusion collapse_confusion(const Confusion& five_class);

struct ErrorBreakdown {
    std::size_t concept_only = 0;      // claim <-> argument, stance right
    std::size_t stance_only = 0;       // for <-> against, concept right
    std::size_t concept_and_stance = 0;
    std::size_t stance_vs_none = 0;    // a stance class confused with no_stance, either way
    std::size_t total_errors = 0;

    std::size_t binned() const { return concept_only + stance_only + concept_and_stance + stance_vs_none; }
};

ErrorBreakdown error_breakdown(const std::vector<Label>& gold, const std::vector<Label>& pred);

struct Summary {
    double mean = 0.0;
    double stddev = 0.0;  // sample (n - 1)
};

struct AggregatedMetrics {
    std::size_t runs = 0;
    Summary accuracy;
    Summary macro_f1;
    std::vector<Summary> precision;
    std::vector<Summary> recall;
    std::vector<Summary> f1;
};

Summary summarize(const std::vector<double>& values);
AggregatedMetrics aggregate_runs(const std::vector<MetricsTable>& tables);

// Wall-clock and size accounting for one trained variant.
struct RunAccounting {
    std::string variant;
    std::vector<double> epoch_seconds;
    std::size_t total_parameters = 0;
    std::size_t trainable_parameters = 0;
    std::size_t checkpoint_bytes = 0;
};

struct FeasibilityRow {
    std::string variant;
    std::size_t runs = 0;
    std::size_t epochs = 0;
    double total_seconds = 0.0;      // mean over runs
    double seconds_per_epoch = 0.0;
    std::size_t total_parameters = 0;
    std::size_t trainable_parameters = 0;
    std::size_t checkpoint_bytes = 0;
};

// One row per variant, in first-seen order.
std::vector<FeasibilityRow> feasibility_report(const std::vector<RunAccounting>& runs);
void write_feasibility_csv(std::ostream& out, const std::vector<FeasibilityRow>& rows);

// Identifies one run in the metrics CSV.
struct RunKey {
    std::string variant;
    std::string persons;
    std::string labels;
    double proportion = 1.0;
    std::uint64_t seed = 0;
};

inline constexpr const char* kMetricsCsvHeader =
    "variant,persons,labels,proportion,seed,class,precision,recall,f1,accuracy,macro_f1,support";

// One row per class; `class_names` sized like the table.
void write_metrics_rows(std::ostream& out, const RunKey& key, const MetricsTable& m,
                        const std::vector<std::string>& class_names);

std::vector<std::string> label_names();
std::vector<std::string> stance_names();

}  // namespace argmine
