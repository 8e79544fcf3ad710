#include "argmine/evaluation.hpp"

#include <cmath>
#include <map>
#include <ostream>
#include <stdexcept>

#include "argmine/text.hpp"

namespace argmine {

std::size_t Confusion::total() const {
    std::size_t n = 0;
    for (auto c : counts) n += c;
    return n;
}

std::size_t Confusion::trace() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < classes; ++i) n += at(i, i);
    return n;
}

Confusion confusion(const std::vector<std::size_t>& gold, const std::vector<std::size_t>& pred,
                    std::size_t classes) {
    if (gold.size() != pred.size()) {
        throw std::invalid_argument("confusion: " + std::to_string(gold.size()) + " gold vs " +
                                    std::to_string(pred.size()) + " predicted labels");
    }
    if (gold.empty()) throw std::invalid_argument("confusion: no labels");
    Confusion c(classes);
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (gold[i] >= classes || pred[i] >= classes) throw std::invalid_argument("confusion: class out of range");
        ++c.at(gold[i], pred[i]);
    }
    return c;
}

Confusion confusion(const std::vector<Label>& gold, const std::vector<Label>& pred) {
    std::vector<std::size_t> g, p;
    g.reserve(gold.size());
    p.reserve(pred.size());
    for (auto l : gold) g.push_back(index_of(l));
    for (auto l : pred) p.push_back(index_of(l));
    return confusion(g, p, kLabelCount);
}

MetricsTable metrics(const Confusion& c) {
    const std::size_t k = c.classes;
    const std::size_t total = c.total();
    if (total == 0) throw std::invalid_argument("metrics: empty confusion matrix");
    MetricsTable m;
    m.precision.assign(k, 0.0);
    m.recall.assign(k, 0.0);
    m.f1.assign(k, 0.0);
    m.support.assign(k, 0);
    m.precision_undefined.assign(k, false);
    m.recall_undefined.assign(k, false);
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t predicted = 0;
        for (std::size_t g = 0; g < k; ++g) predicted += c.at(g, i);
        for (std::size_t p = 0; p < k; ++p) m.support[i] += c.at(i, p);
        const double tp = static_cast<double>(c.at(i, i));
        if (predicted == 0) {
            m.precision_undefined[i] = true;
        } else {
            m.precision[i] = tp / static_cast<double>(predicted);
        }
        if (m.support[i] == 0) {
            m.recall_undefined[i] = true;
            m.has_zero_support = true;
        } else {
            m.recall[i] = tp / static_cast<double>(m.support[i]);
        }
        const double denom = m.precision[i] + m.recall[i];
        m.f1[i] = denom > 0.0 ? 2.0 * m.precision[i] * m.recall[i] / denom : 0.0;
    }
    double sum = 0.0;
    for (double f : m.f1) sum += f;
    m.macro_f1 = sum / static_cast<double>(k);
    m.accuracy = static_cast<double>(c.trace()) / static_cast<double>(total);
    return m;
}

Stance collapse_stance(Label l) { return stance_of(l); }

Confusion collapse_confusion(const Confusion& five) {
    if (five.classes != kLabelCount) throw std::invalid_argument("collapse_confusion: expects 5 classes");
    Confusion out(kStanceCount);
    for (Label g : kAllLabels) {
        for (Label p : kAllLabels) {
            out.at(static_cast<std::size_t>(collapse_stance(g)), static_cast<std::size_t>(collapse_stance(p))) +=
                five.at(index_of(g), index_of(p));
        }
    }
    return out;
}

ErrorBreakdown error_breakdown(const std::vector<Label>& gold, const std::vector<Label>& pred) {
    if (gold.size() != pred.size()) throw std::invalid_argument("error_breakdown: length mismatch");
    ErrorBreakdown b;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        const Label g = gold[i];
        const Label p = pred[i];
        if (g == p) continue;
        ++b.total_errors;
        if (!is_stance(g) || !is_stance(p)) {
            ++b.stance_vs_none;
        } else {
            const bool stance_ok = stance_of(g) == stance_of(p);
            const bool concept_ok = is_claim(g) == is_claim(p);
            if (stance_ok) {
                ++b.concept_only;
            } else if (concept_ok) {
                ++b.stance_only;
            } else {
                ++b.concept_and_stance;
            }
        }
    }
    return b;
}

Summary summarize(const std::vector<double>& values) {
    if (values.size() < 2) throw std::invalid_argument("summarize: need at least 2 values");
    // Shifted by the first value so that k identical runs give that value
    // back exactly, with a zero spread.
    const double shift = values.front();
    double offset = 0.0;
    for (double v : values) offset += v - shift;
    offset /= static_cast<double>(values.size());
    Summary s;
    s.mean = shift + offset;
    double ss = 0.0;
    for (double v : values) ss += (v - shift - offset) * (v - shift - offset);
    s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    return s;
}

AggregatedMetrics aggregate_runs(const std::vector<MetricsTable>& tables) {
    if (tables.size() < 2) throw std::invalid_argument("aggregate_runs: need at least 2 runs");
    const std::size_t k = tables.front().classes();
    for (const auto& t : tables) {
        if (t.classes() != k) throw std::invalid_argument("aggregate_runs: class counts differ");
    }
    auto collect = [&](auto getter) {
        std::vector<double> v;
        for (const auto& t : tables) v.push_back(getter(t));
        return summarize(v);
    };
    AggregatedMetrics a;
    a.runs = tables.size();
    a.accuracy = collect([](const MetricsTable& t) { return t.accuracy; });
    a.macro_f1 = collect([](const MetricsTable& t) { return t.macro_f1; });
    for (std::size_t c = 0; c < k; ++c) {
        a.precision.push_back(collect([c](const MetricsTable& t) { return t.precision[c]; }));
        a.recall.push_back(collect([c](const MetricsTable& t) { return t.recall[c]; }));
        a.f1.push_back(collect([c](const MetricsTable& t) { return t.f1[c]; }));
    }
    return a;
}

std::vector<FeasibilityRow> feasibility_report(const std::vector<RunAccounting>& runs) {
    std::vector<FeasibilityRow> rows;
    std::map<std::string, std::size_t> index;
    for (const auto& r : runs) {
        auto [it, fresh] = index.emplace(r.variant, rows.size());
        if (fresh) {
            FeasibilityRow row;
            row.variant = r.variant;
            row.epochs = r.epoch_seconds.size();
            row.total_parameters = r.total_parameters;
            row.trainable_parameters = r.trainable_parameters;
            row.checkpoint_bytes = r.checkpoint_bytes;
            rows.push_back(row);
        }
        auto& row = rows[it->second];
        double seconds = 0.0;
        for (double s : r.epoch_seconds) seconds += s;
        row.total_seconds += seconds;
        ++row.runs;
    }
    for (auto& row : rows) {
        row.total_seconds /= static_cast<double>(row.runs);
        row.seconds_per_epoch = row.epochs > 0 ? row.total_seconds / static_cast<double>(row.epochs) : 0.0;
    }
    return rows;
}

void write_feasibility_csv(std::ostream& out, const std::vector<FeasibilityRow>& rows) {
    out << "variant,runs,epochs,total_seconds,seconds_per_epoch,total_parameters,trainable_parameters,"
           "checkpoint_bytes\n";
    for (const auto& r : rows) {
        out << csv_field(r.variant) << ',' << r.runs << ',' << r.epochs << ',' << format_fixed(r.total_seconds, 3)
            << ',' << format_fixed(r.seconds_per_epoch, 3) << ',' << r.total_parameters << ','
            << r.trainable_parameters << ',' << r.checkpoint_bytes << '\n';
    }
}

void write_metrics_rows(std::ostream& out, const RunKey& key, const MetricsTable& m,
                        const std::vector<std::string>& class_names) {
    if (class_names.size() != m.classes()) throw std::invalid_argument("write_metrics_rows: class name count");
    for (std::size_t c = 0; c < m.classes(); ++c) {
        out << csv_field(key.variant) << ',' << csv_field(key.persons) << ',' << csv_field(key.labels) << ','
            << format_double(key.proportion) << ',' << key.seed << ',' << csv_field(class_names[c]) << ','
            << format_double(m.precision[c]) << ',' << format_double(m.recall[c]) << ','
            << format_double(m.f1[c]) << ',' << format_double(m.accuracy) << ',' << format_double(m.macro_f1)
            << ',' << m.support[c] << '\n';
    }
}

std::vector<std::string> label_names() {
    std::vector<std::string> out;
    for (Label l : kAllLabels) out.emplace_back(to_string(l));
    return out;
}

std::vector<std::string> stance_names() {
    return {std::string(to_string(Stance::pro)), std::string(to_string(Stance::contra)),
            std::string(to_string(Stance::neutral))};
}

}  // namespace argmine
