#include "argmine/encoding.hpp"

#include <algorithm>

#include "argmine/errors.hpp"
#include "argmine/text.hpp"

namespace argmine {

std::string_view to_string(Segment s) {
    switch (s) {
        case Segment::special: return "special";
        case Segment::target: return "target";
        case Segment::before: return "before";
        case Segment::after: return "after";
        case Segment::topic: return "topic";
        case Segment::pattern: return "pattern";
    }
    return "?";
}

namespace {

struct Piece {
    Segment kind;
    std::vector<TokenId> ids;
};

class SequenceBuilder {
public:
    void append(Segment kind, const std::vector<TokenId>& ids) {
        if (ids.empty()) return;
        const auto begin = out_.ids.size();
        out_.ids.insert(out_.ids.end(), ids.begin(), ids.end());
        out_.segments.push_back({kind, begin, out_.ids.size()});
    }
    void append(Segment kind, TokenId id) { append(kind, std::vector<TokenId>{id}); }
    void mark_mask() { out_.mask_positions.push_back(out_.ids.size()); }

    // Appends pieces in order until `budget` tokens are used.
    void append_truncated(const std::vector<Piece>& pieces, std::size_t budget) {
        for (const auto& p : pieces) {
            const auto take = std::min(budget, p.ids.size());
            if (take < p.ids.size()) {
                out_.truncated = true;
                if (p.kind == Segment::target) out_.target_truncated = true;
            }
            append(p.kind, std::vector<TokenId>(p.ids.begin(), p.ids.begin() + static_cast<long>(take)));
            budget -= take;
        }
    }

    EncodedInput finish() { return std::move(out_); }

private:
    EncodedInput out_;
};

std::vector<TokenId> encode_all(const std::vector<std::string>& sentences, const Tokenizer& t) {
    std::vector<TokenId> ids;
    for (const auto& s : sentences) {
        auto part = t.encode(s);
        ids.insert(ids.end(), part.begin(), part.end());
    }
    return ids;
}

// target </s> before </s> after
std::vector<Piece> body_pieces(const SentenceUnit& u, const Tokenizer& t) {
    const TokenId sep = t.specials().separator;
    return {
        {Segment::target, t.encode(u.text)},
        {Segment::special, {sep}},
        {Segment::before, encode_all(u.context_before, t)},
        {Segment::special, {sep}},
        {Segment::after, encode_all(u.context_after, t)},
    };
}

struct PatternPart {
    enum class Kind { text, mask, input } kind;
    std::string text;
};

std::vector<PatternPart> parse_pattern(const std::string& pattern) {
    std::vector<PatternPart> parts;
    std::size_t inputs = 0;
    std::size_t pos = 0;
    std::string text;
    auto flush = [&] {
        auto tt = trim(text);
        if (!tt.empty()) parts.push_back({PatternPart::Kind::text, std::move(tt)});
        text.clear();
    };
    const auto mask = PatternVerbalizerPair::kMaskMarker;
    const auto slot = PatternVerbalizerPair::kInputSlot;
    while (pos < pattern.size()) {
        if (pattern.compare(pos, mask.size(), mask) == 0) {
            flush();
            parts.push_back({PatternPart::Kind::mask, {}});
            pos += mask.size();
        } else if (pattern.compare(pos, slot.size(), slot) == 0) {
            flush();
            parts.push_back({PatternPart::Kind::input, {}});
            ++inputs;
            pos += slot.size();
        } else {
            text.push_back(pattern[pos++]);
        }
    }
    flush();
    if (inputs != 1) {
        throw ConfigError("pattern must contain exactly one " + std::string(slot) + " slot: '" +
                          pattern + "'");
    }
    return parts;
}

}  // namespace

std::size_t PatternVerbalizerPair::mask_count() const {
    std::size_t n = 0;
    for (const auto& p : parse_pattern(pattern)) {
        if (p.kind == PatternPart::Kind::mask) ++n;
    }
    return n;
}

PatternVerbalizerPair naive_pvp() {
    PatternVerbalizerPair p;
    p.name = "naive";
    p.pattern = "Dies ist ein <mask> <mask> Waffenlieferungen an die Ukraine: [Input]";
    p.verbalizers[index_of(Label::argument_for)] = "argument für";
    p.verbalizers[index_of(Label::argument_against)] = "argument gegen";
    p.verbalizers[index_of(Label::claim_for)] = "claim für";
    p.verbalizers[index_of(Label::claim_against)] = "claim gegen";
    p.verbalizers[index_of(Label::no_stance)] = "Satz ohne";
    p.required_tokens_per_label = 2;
    p.required_vocab_size = 6;
    return p;
}

PatternVerbalizerPair elaborate_pvp() {
    PatternVerbalizerPair p;
    p.name = "elaborate";
    p.pattern = "Dieser Satz <mask> <mask> <mask> Waffenlieferungen an die Ukraine: [Input]";
    p.verbalizers[index_of(Label::argument_for)] = "argumentiert für";
    p.verbalizers[index_of(Label::argument_against)] = "argumentiert gegen";
    p.verbalizers[index_of(Label::claim_for)] = "fordert";
    p.verbalizers[index_of(Label::claim_against)] = "widerspricht";
    p.verbalizers[index_of(Label::no_stance)] = "ist neutral zu";
    return p;
}

PatternVerbalizerPair pvp_preset(std::string_view name) {
    if (name == "naive") return naive_pvp();
    if (name == "elaborate") return elaborate_pvp();
    throw ConfigError("unknown PVP preset '" + std::string(name) + "' (expected naive or elaborate)");
}

PatternVerbalizerPair pvp_from_config(const std::map<std::string, std::string>& entries) {
    PatternVerbalizerPair p;
    auto it = entries.find("pattern");
    if (it == entries.end()) throw ConfigError("PVP configuration lacks 'pattern'");
    p.pattern = it->second;
    p.name = entries.contains("name") ? entries.at("name") : "custom";
    for (Label l : kAllLabels) {
        const auto key = "verbalizer." + std::string(to_string(l));
        auto v = entries.find(key);
        if (v == entries.end() || trim(v->second).empty()) {
            throw ConfigError("PVP configuration lacks '" + key + "'");
        }
        p.verbalizers[index_of(l)] = trim(v->second);
    }
    parse_pattern(p.pattern);
    return p;
}

PatternVerbalizerPair verbalize(PatternVerbalizerPair pvp, const Tokenizer& tokenizer) {
    std::size_t longest = 0;
    for (Label l : kAllLabels) {
        const auto& text = pvp.verbalizers[index_of(l)];
        if (trim(text).empty()) {
            throw ValidationError("PVP '" + pvp.name + "': empty verbalizer for " +
                                  std::string(to_string(l)));
        }
        auto ids = tokenizer.encode(text);
        if (std::find(ids.begin(), ids.end(), tokenizer.specials().unknown) != ids.end()) {
            throw ValidationError("PVP '" + pvp.name + "': verbalizer '" + text +
                                  "' contains a token outside the vocabulary");
        }
        if (pvp.required_tokens_per_label && ids.size() != *pvp.required_tokens_per_label) {
            throw ValidationError("PVP '" + pvp.name + "': verbalizer '" + text + "' has " +
                                  std::to_string(ids.size()) + " tokens, expected " +
                                  std::to_string(*pvp.required_tokens_per_label) +
                                  "; adjust the verbalizers to this tokenizer");
        }
        longest = std::max(longest, ids.size());
        pvp.verbalizer_token_ids[index_of(l)] = std::move(ids);
    }

    const auto masks = pvp.mask_count();
    if (masks != longest) {
        throw ValidationError("PVP '" + pvp.name + "': pattern has " + std::to_string(masks) +
                              " mask slots but the longest verbalizer has " + std::to_string(longest) +
                              " tokens");
    }

    pvp.verbalizer_vocab.clear();
    for (auto& slots : pvp.verbalizer_slots) slots.clear();
    for (std::size_t j = 0; j < longest; ++j) {
        for (Label l : kAllLabels) {
            const auto& ids = pvp.verbalizer_token_ids[index_of(l)];
            if (j >= ids.size()) continue;
            auto it = std::find(pvp.verbalizer_vocab.begin(), pvp.verbalizer_vocab.end(), ids[j]);
            if (it == pvp.verbalizer_vocab.end()) {
                pvp.verbalizer_vocab.push_back(ids[j]);
                it = pvp.verbalizer_vocab.end() - 1;
            }
            pvp.verbalizer_slots[index_of(l)].push_back(
                static_cast<std::size_t>(it - pvp.verbalizer_vocab.begin()));
        }
    }
    if (pvp.required_vocab_size && pvp.verbalizer_vocab.size() != *pvp.required_vocab_size) {
        throw ValidationError("PVP '" + pvp.name + "': verbalizer vocabulary has " +
                              std::to_string(pvp.verbalizer_vocab.size()) + " tokens, expected " +
                              std::to_string(*pvp.required_vocab_size));
    }
    pvp.validated = true;
    return pvp;
}

EncodedInput build_standard_input(const SentenceUnit& u, const Tokenizer& t, std::size_t max_length) {
    if (max_length < 2) throw ConfigError("max_length must leave room for <s> and </s>");
    const auto& sp = t.specials();
    SequenceBuilder b;
    b.append(Segment::special, sp.begin);
    b.append_truncated(body_pieces(u, t), max_length - 2);
    b.append(Segment::special, sp.separator);
    return b.finish();
}

EncodedInput build_topic_input(const std::string& topic, const SentenceUnit& u, const Tokenizer& t,
                               std::size_t max_length) {
    if (trim(topic).empty()) throw ConfigError("topic must be non-empty");
    const auto& sp = t.specials();
    const auto topic_ids = t.encode(topic);
    const std::size_t fixed = topic_ids.size() + 3;
    if (fixed >= max_length) throw ConfigError("topic leaves no room for the input at this max_length");
    SequenceBuilder b;
    b.append(Segment::special, sp.begin);
    b.append(Segment::topic, topic_ids);
    b.append(Segment::special, sp.separator);
    b.append_truncated(body_pieces(u, t), max_length - fixed);
    b.append(Segment::special, sp.separator);
    return b.finish();
}

EncodedInput build_pet_input(const SentenceUnit& u, const PatternVerbalizerPair& pvp, const Tokenizer& t,
                             std::size_t max_length, const std::optional<std::string>& topic) {
    if (!pvp.validated) throw ConfigError("PVP '" + pvp.name + "' has not been verbalized");
    const auto& sp = t.specials();
    const auto parts = parse_pattern(pvp.pattern);

    std::vector<std::vector<TokenId>> part_ids(parts.size());
    std::size_t fixed = 2;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (parts[i].kind == PatternPart::Kind::text) {
            part_ids[i] = t.encode(parts[i].text);
            fixed += part_ids[i].size();
        } else if (parts[i].kind == PatternPart::Kind::mask) {
            fixed += 1;
        }
    }
    std::vector<TokenId> topic_ids;
    if (topic) {
        if (trim(*topic).empty()) throw ConfigError("topic must be non-empty");
        topic_ids = t.encode(*topic);
        fixed += topic_ids.size() + 1;
    }
    if (fixed >= max_length) throw ConfigError("pattern leaves no room for the input at this max_length");

    SequenceBuilder b;
    b.append(Segment::special, sp.begin);
    if (topic) {
        b.append(Segment::topic, topic_ids);
        b.append(Segment::special, sp.separator);
    }
    for (std::size_t i = 0; i < parts.size(); ++i) {
        switch (parts[i].kind) {
            case PatternPart::Kind::text:
                b.append(Segment::pattern, part_ids[i]);
                break;
            case PatternPart::Kind::mask:
                b.mark_mask();
                b.append(Segment::pattern, sp.mask);
                break;
            case PatternPart::Kind::input:
                b.append_truncated(body_pieces(u, t), max_length - fixed);
                break;
        }
    }
    b.append(Segment::special, sp.separator);
    return b.finish();
}

EncodedInput build_stance_input(const StanceUnit& u, const Tokenizer& t, std::size_t max_length) {
    SentenceUnit unit;
    unit.unit_id = "stance";
    unit.text = u.text;
    return build_topic_input(u.topic, unit, t, max_length);
}

}  // namespace argmine
