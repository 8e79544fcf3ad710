#include "argmine/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "argmine/errors.hpp"
#include "argmine/rng.hpp"
#include "argmine/text.hpp"
#include "json.hpp"

namespace argmine {

using json = nlohmann::ordered_json;

std::string_view to_string(Label l) {
    switch (l) {
        case Label::argument_for: return "argument_for";
        case Label::argument_against: return "argument_against";
        case Label::claim_for: return "claim_for";
        case Label::claim_against: return "claim_against";
        case Label::no_stance: return "no_stance";
    }
    return "?";
}

std::optional<Label> parse_label(std::string_view s) {
    for (Label l : kAllLabels) {
        if (to_string(l) == s) return l;
    }
    return std::nullopt;
}

std::string_view to_string(Stance s) {
    switch (s) {
        case Stance::pro: return "for";
        case Stance::contra: return "against";
        case Stance::neutral: return "no_stance";
    }
    return "?";
}

std::string_view to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::dev: return "dev";
        case Split::test: return "test";
    }
    return "?";
}

std::optional<Split> parse_split(std::string_view s) {
    if (s == "train") return Split::train;
    if (s == "dev") return Split::dev;
    if (s == "test") return Split::test;
    return std::nullopt;
}

LabelCounts count_labels(const LabeledDataset& ds) {
    LabelCounts counts{};
    for (const auto& u : ds.units) ++counts[index_of(u.label)];
    return counts;
}

void validate_unit(const SentenceUnit& u) {
    auto fail = [&](const std::string& what) {
        throw ValidationError("unit '" + u.unit_id + "': " + what);
    };
    if (u.unit_id.empty()) fail("empty unit_id");
    if (u.text.empty()) fail("empty text");
    if (u.context_before.size() > 2) fail("more than 2 context_before sentences");
    if (u.context_after.size() > 2) fail("more than 2 context_after sentences");
    if (u.onion && !is_stance(u.label)) fail("onion flag set on a no_stance unit");
    if (u.coder_labels && u.coder_labels->empty()) fail("coder_labels present but empty");
}

void validate_dataset(const LabeledDataset& ds) {
    std::set<std::string_view> ids;
    std::size_t with_split = 0;
    for (const auto& u : ds.units) {
        validate_unit(u);
        if (!ids.insert(u.unit_id).second) {
            throw ValidationError("duplicate unit_id '" + u.unit_id + "'");
        }
        if (u.split) ++with_split;
    }
    if (with_split != 0 && with_split != ds.units.size()) {
        throw ValidationError("split assigned to only " + std::to_string(with_split) + " of " +
                              std::to_string(ds.units.size()) + " units");
    }
}

namespace {

std::vector<std::string> string_list(const json& j, const char* key) {
    std::vector<std::string> out;
    if (!j.contains(key)) return out;
    for (const auto& s : j.at(key)) out.push_back(s.get<std::string>());
    return out;
}

Label label_field(const json& j, const char* key) {
    const auto s = j.at(key).get<std::string>();
    auto l = parse_label(s);
    if (!l) throw LoadError("unknown label '" + s + "'");
    return *l;
}

SentenceUnit unit_from_json(const json& j) {
    SentenceUnit u;
    u.unit_id = j.at("unit_id").get<std::string>();
    u.doc_id = j.value("doc_id", std::string{});
    u.sent_index = j.value("sent_index", std::size_t{0});
    u.text = j.at("text").get<std::string>();
    u.context_before = string_list(j, "context_before");
    u.context_after = string_list(j, "context_after");
    u.label = label_field(j, "label");
    u.onion = j.value("onion", false);
    if (j.contains("coder_labels") && !j.at("coder_labels").is_null()) {
        std::map<std::string, Label> coders;
        for (const auto& [coder, value] : j.at("coder_labels").items()) {
            const auto s = value.get<std::string>();
            auto l = parse_label(s);
            if (!l) throw LoadError("unknown coder label '" + s + "'");
            coders.emplace(coder, *l);
        }
        u.coder_labels = std::move(coders);
    }
    if (j.contains("split") && !j.at("split").is_null()) {
        const auto s = j.at("split").get<std::string>();
        u.split = parse_split(s);
        if (!u.split) throw LoadError("unknown split '" + s + "'");
    }
    return u;
}

json unit_to_json(const SentenceUnit& u) {
    json j;
    j["unit_id"] = u.unit_id;
    j["doc_id"] = u.doc_id;
    j["sent_index"] = u.sent_index;
    j["text"] = u.text;
    j["context_before"] = u.context_before;
    j["context_after"] = u.context_after;
    j["label"] = std::string(to_string(u.label));
    j["onion"] = u.onion;
    if (u.coder_labels) {
        json coders = json::object();
        for (const auto& [coder, l] : *u.coder_labels) coders[coder] = std::string(to_string(l));
        j["coder_labels"] = std::move(coders);
    }
    if (u.split) j["split"] = std::string(to_string(*u.split));
    return j;
}

}  // namespace

LabeledDataset parse_dataset(std::istream& in) {
    LabeledDataset ds;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        SentenceUnit u;
        try {
            u = unit_from_json(json::parse(line));
        } catch (const std::exception& e) {
            throw LoadError("line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
            validate_unit(u);
        } catch (const ValidationError& e) {
            throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
        }
        ds.units.push_back(std::move(u));
    }
    validate_dataset(ds);
    return ds;
}

LabeledDataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open dataset '" + path.string() + "'");
    return parse_dataset(in);
}

void write_dataset(std::ostream& out, const LabeledDataset& ds) {
    for (const auto& u : ds.units) out << unit_to_json(u).dump() << '\n';
}

void save_dataset(const std::filesystem::path& path, const LabeledDataset& ds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("cannot write dataset '" + path.string() + "'");
    write_dataset(out, ds);
}

LabeledDataset subset(const LabeledDataset& ds, const std::vector<std::size_t>& indices) {
    LabeledDataset out;
    out.metadata = ds.metadata;
    out.units.reserve(indices.size());
    for (auto i : indices) out.units.push_back(ds.units.at(i));
    return out;
}

LabeledDataset units_in_split(const LabeledDataset& ds, Split s) {
    LabeledDataset out;
    out.metadata = ds.metadata;
    for (const auto& u : ds.units) {
        if (u.split == s) out.units.push_back(u);
    }
    return out;
}

std::optional<Label> aggregate_majority(const std::map<std::string, Label>& coder_labels,
                                        std::size_t quorum) {
    if (coder_labels.empty()) throw std::invalid_argument("aggregate_majority: no coder labels");
    if (quorum == 0 || quorum > coder_labels.size()) {
        throw std::invalid_argument("aggregate_majority: quorum " + std::to_string(quorum) +
                                    " not in [1, " + std::to_string(coder_labels.size()) + "]");
    }
    LabelCounts votes{};
    for (const auto& [coder, l] : coder_labels) ++votes[index_of(l)];
    const auto best = std::max_element(votes.begin(), votes.end());
    const auto winners = std::count(votes.begin(), votes.end(), *best);
    if (winners != 1 || *best < quorum) return std::nullopt;
    return kAllLabels[static_cast<std::size_t>(best - votes.begin())];
}

AlphaResult krippendorff_alpha(const ReliabilityMatrix& m) {
    if (m.values.size() < 2) throw ValidationError("reliability matrix needs at least 2 coders");
    const std::size_t units = m.values.front().size();
    for (const auto& row : m.values) {
        if (row.size() != units) throw ValidationError("reliability matrix is not rectangular");
    }

    std::map<std::string, std::size_t> category_index;
    for (const auto& row : m.values) {
        for (const auto& v : row) {
            if (v) category_index.emplace(*v, 0);
        }
    }
    std::size_t next = 0;
    for (auto& [name, idx] : category_index) idx = next++;
    const std::size_t k = category_index.size();

    // coincidence matrix o[c][d], each unit contributing pairs weighted 1/(m_u - 1)
    std::vector<double> o(k * k, 0.0);
    std::size_t pairable = 0;
    for (std::size_t u = 0; u < units; ++u) {
        std::vector<std::size_t> present;
        for (const auto& row : m.values) {
            if (row[u]) present.push_back(category_index.at(*row[u]));
        }
        if (present.size() < 2) continue;
        pairable += present.size();
        const double w = 1.0 / static_cast<double>(present.size() - 1);
        for (std::size_t i = 0; i < present.size(); ++i) {
            for (std::size_t j = 0; j < present.size(); ++j) {
                if (i != j) o[present[i] * k + present[j]] += w;
            }
        }
    }
    if (pairable == 0) throw ValidationError("reliability matrix has no unit with 2 or more values");

    std::vector<double> marginal(k, 0.0);
    double n = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t d = 0; d < k; ++d) marginal[c] += o[c * k + d];
        n += marginal[c];
    }
    double observed = 0.0;
    double expected = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t d = 0; d < k; ++d) {
            if (c == d) continue;
            observed += o[c * k + d];
            expected += marginal[c] * marginal[d];
        }
    }
    AlphaResult r;
    r.pairable_values = pairable;
    if (expected == 0.0) {
        r.alpha = 1.0;
        r.degenerate = true;
        return r;
    }
    r.alpha = 1.0 - (n - 1.0) * observed / expected;
    return r;
}

ReliabilityMatrix parse_reliability_csv(std::istream& in) {
    ReliabilityMatrix m;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto cells = split_csv_line(line);
        m.coders.push_back(trim(cells.front()));
        std::vector<std::optional<std::string>> row;
        for (std::size_t i = 1; i < cells.size(); ++i) {
            auto v = trim(cells[i]);
            if (v.empty()) {
                row.emplace_back(std::nullopt);
            } else {
                row.emplace_back(std::move(v));
            }
        }
        if (!m.values.empty() && row.size() != m.values.front().size()) {
            throw LoadError("line " + std::to_string(line_no) + ": expected " +
                            std::to_string(m.values.front().size()) + " unit cells, got " +
                            std::to_string(row.size()));
        }
        m.values.push_back(std::move(row));
    }
    return m;
}

ReliabilityMatrix load_reliability_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open reliability matrix '" + path.string() + "'");
    return parse_reliability_csv(in);
}

namespace {

std::size_t floor_share(double ratio, std::size_t n) {
    // tolerance absorbs products like 0.7 * 70 landing a hair below an integer
    return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
}

std::array<std::vector<std::size_t>, kLabelCount> indices_by_label(const LabeledDataset& ds) {
    std::array<std::vector<std::size_t>, kLabelCount> by_label;
    for (std::size_t i = 0; i < ds.units.size(); ++i) {
        by_label[index_of(ds.units[i].label)].push_back(i);
    }
    return by_label;
}

}  // namespace

LabeledDataset split_dataset(const LabeledDataset& ds, SplitRatios ratios, std::uint64_t seed) {
    if (ratios.train < 0 || ratios.dev < 0 || ratios.test < 0) {
        throw std::invalid_argument("split ratios must be non-negative");
    }
    if (std::abs(ratios.train + ratios.dev + ratios.test - 1.0) > 1e-9) {
        throw std::invalid_argument("split ratios must sum to 1");
    }
    LabeledDataset out = ds;
    const auto by_label = indices_by_label(ds);
    for (Label l : kAllLabels) {
        auto members = by_label[index_of(l)];
        Rng rng(derive_seed(seed, std::string("split/") + std::string(to_string(l))));
        rng.shuffle(members);
        const std::size_t n = members.size();
        const std::size_t n_dev = floor_share(ratios.dev, n);
        const std::size_t n_test = floor_share(ratios.test, n);
        for (std::size_t i = 0; i < n; ++i) {
            Split s = Split::train;
            if (i < n_dev) {
                s = Split::dev;
            } else if (i < n_dev + n_test) {
                s = Split::test;
            }
            out.units[members[i]].split = s;
        }
    }
    return out;
}

std::size_t no_stance_target(std::size_t stance_count, double share) {
    if (!(share > 0.0 && share < 1.0)) throw std::invalid_argument("share must be in (0, 1)");
    // Closed form gives a starting point; the loop settles the exact boundary.
    const double k = static_cast<double>(stance_count);
    auto n = static_cast<std::size_t>(std::max(0.0, std::floor(share * k / (1.0 - share)) - 1.0));
    auto reaches = [&](std::size_t cand) {
        const double c = static_cast<double>(cand);
        return c >= share * (c + k) - 1e-9 * (c + k);
    };
    while (n > 0 && reaches(n - 1)) --n;
    while (!reaches(n)) ++n;
    return n;
}

DownsampleResult downsample_no_stance(const LabeledDataset& ds, double share, std::uint64_t seed) {
    std::vector<std::size_t> pool;
    std::size_t stance = 0;
    for (std::size_t i = 0; i < ds.units.size(); ++i) {
        if (ds.units[i].label == Label::no_stance) {
            pool.push_back(i);
        } else {
            ++stance;
        }
    }
    if (pool.empty()) throw std::invalid_argument("downsample_no_stance: dataset has no no_stance units");

    DownsampleResult r;
    r.target = no_stance_target(stance, share);
    std::vector<bool> keep(ds.units.size(), true);
    if (r.target >= pool.size()) {
        r.shortfall = r.target > pool.size();
        r.kept = pool.size();
    } else {
        Rng rng(derive_seed(seed, "downsample/no_stance"));
        const auto chosen = rng.choose(pool.size(), r.target);
        for (auto i : pool) keep[i] = false;
        for (auto c : chosen) keep[pool[c]] = true;
        r.kept = r.target;
    }
    std::vector<std::size_t> indices;
    for (std::size_t i = 0; i < ds.units.size(); ++i) {
        if (keep[i]) indices.push_back(i);
    }
    r.dataset = subset(ds, indices);
    return r;
}

std::vector<StanceUnit> parse_stance_tsv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw LoadError("stance TSV is empty");
    const auto header = split(line, '\t');
    auto column = [&](std::string_view name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (trim(header[i]) == name) return i;
        }
        return std::nullopt;
    };
    const auto topic_col = column("topic");
    const auto text_col = column("sentence");
    const auto ann_col = column("annotation");
    const auto set_col = column("set");
    if (!topic_col || !text_col || !ann_col) {
        throw LoadError("stance TSV header needs topic, sentence and annotation columns");
    }
    std::vector<StanceUnit> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split(line, '\t');
        const auto need = std::max({*topic_col, *text_col, *ann_col});
        if (cells.size() <= need) {
            throw LoadError("stance TSV line " + std::to_string(line_no) + ": too few columns");
        }
        StanceUnit u;
        u.topic = trim(cells[*topic_col]);
        u.text = trim(cells[*text_col]);
        const auto ann = trim(cells[*ann_col]);
        if (ann == "Argument_for") {
            u.stance = Stance::pro;
        } else if (ann == "Argument_against") {
            u.stance = Stance::contra;
        } else if (ann == "NoArgument") {
            u.stance = Stance::neutral;
        } else {
            throw LoadError("stance TSV line " + std::to_string(line_no) + ": unknown annotation '" +
                            ann + "'");
        }
        if (set_col && *set_col < cells.size()) {
            const auto s = trim(cells[*set_col]);
            if (s == "val") {
                u.split = Split::dev;
            } else if (!s.empty()) {
                u.split = parse_split(s);
            }
        }
        if (u.topic.empty() || u.text.empty()) {
            throw LoadError("stance TSV line " + std::to_string(line_no) + ": empty topic or sentence");
        }
        out.push_back(std::move(u));
    }
    return out;
}

std::vector<StanceUnit> load_stance_tsv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open stance TSV '" + path.string() + "'");
    return parse_stance_tsv(in);
}

}  // namespace argmine
