#include "argmine/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "argmine/errors.hpp"
#include "argmine/rng.hpp"
#include "argmine/text.hpp"

namespace argmine {

namespace {

bool is_word_byte(unsigned char c) {
    return std::isalnum(c) != 0 || c >= 0x80 || c == '_';
}

std::string& field_of(SentenceUnit& u, const FieldRef& f) {
    switch (f.kind) {
        case FieldRef::Kind::context_before: return u.context_before.at(f.index);
        case FieldRef::Kind::context_after: return u.context_after.at(f.index);
        case FieldRef::Kind::text: break;
    }
    return u.text;
}

}  // namespace

DictionaryRecognizer::DictionaryRecognizer(std::vector<std::string> surfaces) {
    for (auto& s : surfaces) {
        auto t = trim(s);
        if (!t.empty()) surfaces_.push_back(std::move(t));
    }
    std::sort(surfaces_.begin(), surfaces_.end(), [](const auto& a, const auto& b) {
        return a.size() != b.size() ? a.size() > b.size() : a < b;
    });
    surfaces_.erase(std::unique(surfaces_.begin(), surfaces_.end()), surfaces_.end());
}

DictionaryRecognizer DictionaryRecognizer::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open person list '" + path.string() + "'");
    std::vector<std::string> surfaces;
    std::string line;
    while (std::getline(in, line)) surfaces.push_back(line);
    return DictionaryRecognizer(std::move(surfaces));
}

std::vector<PersonSpan> DictionaryRecognizer::recognize(const std::string& text) const {
    std::vector<PersonSpan> spans;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const bool at_boundary =
            pos == 0 || !is_word_byte(static_cast<unsigned char>(text[pos - 1]));
        bool matched = false;
        if (at_boundary) {
            for (const auto& s : surfaces_) {
                if (text.compare(pos, s.size(), s) != 0) continue;
                const std::size_t end = pos + s.size();
                if (end < text.size() && is_word_byte(static_cast<unsigned char>(text[end]))) continue;
                spans.push_back({pos, end, s, {}});
                pos = end;
                matched = true;
                break;
            }
        }
        if (!matched) ++pos;
    }
    return spans;
}

std::vector<PersonSpan> recognize_unit(const SentenceUnit& u, const PersonRecognizer& recognizer) {
    std::vector<PersonSpan> all;
    auto add = [&](const std::string& field, FieldRef ref) {
        for (auto span : recognizer.recognize(field)) {
            if (span.end > field.size() || span.start >= span.end ||
                field.compare(span.start, span.end - span.start, span.surface) != 0) {
                throw ValidationError("recognizer returned a span that does not match its field");
            }
            span.field = ref;
            all.push_back(std::move(span));
        }
    };
    add(u.text, {FieldRef::Kind::text, 0});
    for (std::size_t i = 0; i < u.context_before.size(); ++i) {
        add(u.context_before[i], {FieldRef::Kind::context_before, i});
    }
    for (std::size_t i = 0; i < u.context_after.size(); ++i) {
        add(u.context_after[i], {FieldRef::Kind::context_after, i});
    }
    return all;
}

ShuffleResult shuffle_persons(const LabeledDataset& ds, const PersonRecognizer& recognizer,
                              std::uint64_t seed) {
    std::vector<std::vector<PersonSpan>> spans;
    spans.reserve(ds.units.size());
    std::set<std::string> pool_set;
    for (const auto& u : ds.units) {
        spans.push_back(recognize_unit(u, recognizer));
        for (const auto& s : spans.back()) pool_set.insert(s.surface);
    }

    ShuffleResult r;
    r.dataset = ds;
    r.pool.assign(pool_set.begin(), pool_set.end());
    if (r.pool.empty()) {
        std::cerr << "warning: shuffle_persons found no person mentions; dataset unchanged\n";
        r.empty_pool = true;
        return r;
    }

    for (std::size_t i = 0; i < ds.units.size(); ++i) {
        auto& unit_spans = spans[i];
        if (unit_spans.empty()) continue;
        SentenceUnit& u = r.dataset.units[i];
        Rng rng(derive_seed(seed, "persons/" + u.unit_id));
        std::map<std::string, std::string> mapping;
        for (const auto& s : unit_spans) {
            if (!mapping.contains(s.surface)) {
                mapping.emplace(s.surface, r.pool[rng.below(r.pool.size())]);
            }
        }
        // right to left inside each field so earlier offsets stay valid
        std::stable_sort(unit_spans.begin(), unit_spans.end(), [](const auto& a, const auto& b) {
            return a.start > b.start;
        });
        for (const auto& s : unit_spans) {
            field_of(u, s.field).replace(s.start, s.end - s.start, mapping.at(s.surface));
            ++r.replaced_spans;
        }
    }
    return r;
}

LabeledDataset swap_onion(const LabeledDataset& ds) {
    LabeledDataset out = ds;
    for (auto& u : out.units) {
        if (u.onion) u.label = flip_stance(u.label);
    }
    return out;
}

std::string_view to_string(SampleMode m) {
    return m == SampleMode::stratified ? "stratified" : "tfs";
}

std::optional<SampleMode> parse_sample_mode(std::string_view s) {
    if (s == "stratified") return SampleMode::stratified;
    if (s == "tfs") return SampleMode::tfs;
    return std::nullopt;
}

bool FewShotPlan::on_sweep_grid() const {
    return std::any_of(kSweepProportions.begin(), kSweepProportions.end(),
                       [&](double p) { return std::abs(p - proportion) < 1e-12; });
}

namespace {

void check_proportion(double p) {
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("proportion must be in (0, 1]");
}

std::size_t floor_count(double p, std::size_t n) {
    return static_cast<std::size_t>(std::floor(p * static_cast<double>(n) + 1e-9));
}

}  // namespace

LabelCounts stratified_counts(const LabelCounts& class_sizes, double proportion) {
    check_proportion(proportion);
    LabelCounts out{};
    for (std::size_t c = 0; c < kLabelCount; ++c) {
        const auto n = class_sizes[c];
        out[c] = n == 0 ? 0 : std::max<std::size_t>(1, floor_count(proportion, n));
    }
    return out;
}

LabeledDataset sample_stratified(const LabeledDataset& train, double proportion, std::uint64_t seed) {
    if (train.empty()) throw std::invalid_argument("sample_stratified: empty train set");
    const auto want = stratified_counts(count_labels(train), proportion);
    std::array<std::vector<std::size_t>, kLabelCount> by_label;
    for (std::size_t i = 0; i < train.units.size(); ++i) {
        by_label[index_of(train.units[i].label)].push_back(i);
    }
    std::vector<std::size_t> chosen;
    for (Label l : kAllLabels) {
        const auto& members = by_label[index_of(l)];
        Rng rng(derive_seed(seed, std::string("stratified/") + std::string(to_string(l))));
        for (auto j : rng.choose(members.size(), want[index_of(l)])) chosen.push_back(members[j]);
    }
    std::sort(chosen.begin(), chosen.end());
    return subset(train, chosen);
}

LabeledDataset sample_tfs(const LabeledDataset& train, double proportion, std::uint64_t seed) {
    check_proportion(proportion);
    const auto k = floor_count(proportion, train.size());
    if (k == 0) throw std::invalid_argument("sample_tfs: sample size is 0");
    Rng rng(derive_seed(seed, "tfs"));
    return subset(train, rng.choose(train.size(), k));
}

}  // namespace argmine
