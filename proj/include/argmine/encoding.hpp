#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "argmine/corpus.hpp"
#include "argmine/tokenizer.hpp"

namespace argmine {

inline constexpr std::size_t kDefaultMaxLength = 512;

enum class Segment { special, target, before, after, topic, pattern };

std::string_view to_string(Segment s);

struct SegmentSpan {
    Segment kind = Segment::special;
    std::size_t begin = 0;
    std::size_t end = 0;

    bool operator==(const SegmentSpan&) const = default;
};

struct EncodedInput {
    std::vector<TokenId> ids;
    std::vector<std::size_t> mask_positions;
    std::vector<SegmentSpan> segments;  // tiles [0, ids.size())
    bool truncated = false;
    bool target_truncated = false;

    std::size_t size() const { return ids.size(); }
};

// A masked pattern with an [Input] slot plus one verbalizer per label.
// `verbalize` fills in the token-level bookkeeping.
struct PatternVerbalizerPair {
    static constexpr std::string_view kInputSlot = "[Input]";
    static constexpr std::string_view kMaskMarker = "<mask>";

    std::string name;
    std::string pattern;
    std::array<std::string, kLabelCount> verbalizers;
    std::optional<std::size_t> required_tokens_per_label;
    std::optional<std::size_t> required_vocab_size;

    // set by verbalize()
    bool validated = false;
    std::array<std::vector<TokenId>, kLabelCount> verbalizer_token_ids;
    // per label, per verbalizer position: index into verbalizer_vocab
    std::array<std::vector<std::size_t>, kLabelCount> verbalizer_slots;
    std::vector<TokenId> verbalizer_vocab;

    // number of <mask> markers in the pattern
    std::size_t mask_count() const;
    std::size_t vocab_size() const { return verbalizer_vocab.size(); }
};

// "Dies ist ein <mask> <mask> Waffenlieferungen an die Ukraine: [Input]"
PatternVerbalizerPair naive_pvp();
// "Dieser Satz <mask> <mask> <mask> Waffenlieferungen an die Ukraine: [Input]"
PatternVerbalizerPair elaborate_pvp();
// "naive" or "elaborate"; ConfigError otherwise.
PatternVerbalizerPair pvp_preset(std::string_view name);

// Keys: pattern, verbalizer.<label> for all five labels, optional name.
PatternVerbalizerPair pvp_from_config(const std::map<std::string, std::string>& entries);

// Tokenizes verbalizers and builds the verbalizer vocabulary, ordered by
// verbalizer position first and label second. Throws ValidationError when a
// preset's length or vocabulary-size requirement fails under `tokenizer`, or
// when the pattern's mask count differs from the longest verbalizer.
PatternVerbalizerPair verbalize(PatternVerbalizerPair pvp, const Tokenizer& tokenizer);

// <s> target </s> before </s> after </s>, right-truncated to max_length.
EncodedInput build_standard_input(const SentenceUnit& u, const Tokenizer& t,
                                  std::size_t max_length = kDefaultMaxLength);

// <s> topic </s> target </s> before </s> after </s>; the topic is never cut.
EncodedInput build_topic_input(const std::string& topic, const SentenceUnit& u, const Tokenizer& t,
                               std::size_t max_length = kDefaultMaxLength);

// Pattern tokens and masks are kept whole; the [Input] slot holds the
// standard body, truncated by the standard rule. With a topic the sequence
// is <s> topic </s> pattern... </s>.
EncodedInput build_pet_input(const SentenceUnit& u, const PatternVerbalizerPair& pvp,
                             const Tokenizer& t, std::size_t max_length = kDefaultMaxLength,
                             const std::optional<std::string>& topic = std::nullopt);

// Topic-prefixed input for a near-domain stance unit (no context).
EncodedInput build_stance_input(const StanceUnit& u, const Tokenizer& t,
                                std::size_t max_length = kDefaultMaxLength);

}  // namespace argmine
