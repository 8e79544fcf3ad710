#include "argmine/synthetic.hpp"

#include <numeric>
#include <stdexcept>

#include "argmine/rng.hpp"

namespace argmine {

namespace {

const std::array<std::vector<std::string>, kLabelCount>& cue_words() {
    static const std::array<std::vector<std::string>, kLabelCount> cues = {{
        {"liefern", "unterstuetzen", "verteidigen", "staerken"},
        {"verhindern", "eskalieren", "gefaehrden", "blockieren"},
        {"fordert", "verlangt", "befuerwortet", "drängt"},
        {"lehnt", "verweigert", "bremst", "zögert"},
        {"wetter", "bahnhof", "konzert", "markt"},
    }};
    return cues;
}

const std::vector<std::string>& filler_words() {
    static const std::vector<std::string> words = {
        "die",   "der",    "regierung", "heute", "berlin", "panzer",  "waffen", "ukraine",
        "kanzler", "woche", "debatte",  "zeitung", "frage", "bericht", "lage",   "montag"};
    return words;
}

const std::vector<std::string>& context_words() {
    static const std::vector<std::string> words = {"außerdem", "später",  "zuvor",  "interview",
                                                   "sitzung",  "abends",  "partei", "treffen"};
    return words;
}

const std::vector<std::string>& topics() {
    static const std::vector<std::string> t = {"abortion", "cloning", "nuclear energy", "school uniforms"};
    return t;
}

std::string pick(const std::vector<std::string>& words, Rng& rng) { return words[rng.below(words.size())]; }

std::string sentence(const std::vector<std::string>& cues, std::size_t cue_count, std::size_t filler, Rng& rng,
                     const std::string& person) {
    std::vector<std::string> words;
    for (std::size_t i = 0; i < cue_count; ++i) words.push_back(pick(cues, rng));
    for (std::size_t i = 0; i < filler; ++i) words.push_back(pick(filler_words(), rng));
    rng.shuffle(words);
    std::string out = person.empty() ? std::string{} : person + " ";
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i > 0) out += ' ';
        out += words[i];
    }
    return out + " .";
}

std::string context_sentence(Rng& rng) {
    std::string out;
    for (int i = 0; i < 4; ++i) {
        if (i > 0) out += ' ';
        out += pick(i % 2 == 0 ? context_words() : filler_words(), rng);
    }
    return out + " .";
}

}  // namespace

const std::vector<std::string>& synthetic_person_names() {
    static const std::vector<std::string> names = {"Olaf Scholz", "Annalena Baerbock", "Friedrich Merz",
                                                   "Robert Habeck", "Christian Lindner", "Boris Pistorius"};
    return names;
}

std::vector<std::string> synthetic_words() {
    std::vector<std::string> out;
    for (const auto& set : cue_words()) out.insert(out.end(), set.begin(), set.end());
    out.insert(out.end(), filler_words().begin(), filler_words().end());
    out.insert(out.end(), context_words().begin(), context_words().end());
    for (const auto& t : topics()) out.push_back(t);
    for (const auto& n : synthetic_person_names()) out.push_back(n);
    out.emplace_back("stance");
    return out;
}

LabeledDataset synthesize_dataset(const SyntheticConfig& cfg) {
    if (cfg.units == 0) throw std::invalid_argument("synthesize_dataset: units must be positive");
    if (cfg.min_filler > cfg.max_filler) throw std::invalid_argument("synthesize_dataset: filler range");
    if (cfg.units_per_document == 0) throw std::invalid_argument("synthesize_dataset: units_per_document");
    for (double w : cfg.class_weights) {
        if (w < 0.0) throw std::invalid_argument("synthesize_dataset: negative class weight");
    }
    Rng rng(derive_seed(cfg.seed, "synthetic/dataset"));
    LabeledDataset ds;
    ds.metadata["generator"] = "synthetic";
    ds.metadata["seed"] = std::to_string(cfg.seed);
    // Class counts follow the weights with largest remainders, so the
    // composition is exact rather than sampled.
    const double total = std::accumulate(cfg.class_weights.begin(), cfg.class_weights.end(), 0.0);
    if (!(total > 0.0)) throw std::invalid_argument("synthesize_dataset: all class weights are zero");
    std::vector<std::size_t> labels;
    {
        std::array<std::size_t, kLabelCount> counts{};
        std::array<double, kLabelCount> rest{};
        std::size_t assigned = 0;
        for (std::size_t c = 0; c < kLabelCount; ++c) {
            const double exact = cfg.class_weights[c] / total * static_cast<double>(cfg.units);
            counts[c] = static_cast<std::size_t>(exact);
            rest[c] = exact - static_cast<double>(counts[c]);
            assigned += counts[c];
        }
        while (assigned < cfg.units) {
            std::size_t best = 0;
            for (std::size_t c = 1; c < kLabelCount; ++c) {
                if (rest[c] > rest[best]) best = c;
            }
            ++counts[best];
            rest[best] = -1.0;
            ++assigned;
        }
        for (std::size_t c = 0; c < kLabelCount; ++c) labels.insert(labels.end(), counts[c], c);
        rng.shuffle(labels);
    }
    for (std::size_t i = 0; i < cfg.units; ++i) {
        SentenceUnit u;
        const std::size_t c = labels[i];
        u.label = kAllLabels[c];
        u.doc_id = "doc-" + std::to_string(i / cfg.units_per_document);
        u.sent_index = i % cfg.units_per_document;
        u.unit_id = u.doc_id + "-s" + std::to_string(u.sent_index);
        const std::string person = rng.uniform() < cfg.person_rate ? pick(synthetic_person_names(), rng) : "";
        const std::size_t filler = cfg.min_filler + rng.below(cfg.max_filler - cfg.min_filler + 1);
        u.text = sentence(cue_words()[c], cfg.cues_per_unit, filler, rng, person);
        if (cfg.with_context) {
            if (u.sent_index > 0) u.context_before.push_back(context_sentence(rng));
            u.context_after.push_back(context_sentence(rng));
        }
        u.onion = is_stance(u.label) && rng.uniform() < cfg.onion_rate;
        ds.units.push_back(std::move(u));
    }
    return ds;
}

std::vector<StanceUnit> synthesize_stance(std::size_t units, std::uint64_t seed) {
    // pro reuses the *_for cues, contra the *_against cues, neutral no_stance
    Rng rng(derive_seed(seed, "synthetic/stance"));
    const auto& cues = cue_words();
    const std::array<std::vector<std::string>, 3> stance_cues = {{
        [&] { auto v = cues[0]; v.insert(v.end(), cues[2].begin(), cues[2].end()); return v; }(),
        [&] { auto v = cues[1]; v.insert(v.end(), cues[3].begin(), cues[3].end()); return v; }(),
        cues[4],
    }};
    std::vector<StanceUnit> out;
    out.reserve(units);
    for (std::size_t i = 0; i < units; ++i) {
        StanceUnit u;
        const std::size_t c = i % 3;
        u.stance = static_cast<Stance>(c);
        u.topic = pick(topics(), rng);
        u.text = sentence(stance_cues[c], 2, 3 + rng.below(3), rng, "");
        out.push_back(std::move(u));
    }
    Rng order(derive_seed(seed, "synthetic/stance/order"));
    order.shuffle(out);
    return out;
}

}  // namespace argmine
