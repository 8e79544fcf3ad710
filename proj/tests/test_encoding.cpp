#include <gtest/gtest.h>

#include <algorithm>

#include "argmine/encoding.hpp"
#include "argmine/errors.hpp"
#include "argmine/rng.hpp"
#include "fixtures.hpp"

using namespace argmine;
using argmine::testing::make_unit;
using argmine::testing::toy_tokenizer;

namespace {

void expect_tiling(const EncodedInput& in) {
    std::size_t at = 0;
    for (const auto& s : in.segments) {
        EXPECT_EQ(s.begin, at);
        EXPECT_LT(s.begin, s.end);
        at = s.end;
    }
    EXPECT_EQ(at, in.size());
}

std::size_t count_masks(const EncodedInput& in, TokenId mask) {
    return static_cast<std::size_t>(std::count(in.ids.begin(), in.ids.end(), mask));
}

std::vector<TokenId> without_last(std::vector<TokenId> ids) {
    ids.pop_back();
    return ids;
}

std::string words(std::size_t n) {
    std::string s;
    const auto w = synthetic_words();
    for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + w[i % w.size()];
    return s;
}

}  // namespace

class EncodingTest : public ::testing::Test {
protected:
    SubwordTokenizer tok = toy_tokenizer();
    const SpecialIds& sp = tok.specials();
};

TEST(Tokenizer, SubwordPiecesAndUnknown) {
    SubwordTokenizer t({"wider", "##spr", "##icht", "Satz", "."});
    const auto ids = t.encode("widerspricht Satz. Quatsch");
    ASSERT_EQ(ids.size(), 6u);
    EXPECT_EQ(t.piece(ids[0]), "wider");
    EXPECT_EQ(t.piece(ids[2]), "##icht");
    EXPECT_EQ(t.piece(ids[4]), ".");
    EXPECT_EQ(ids[5], t.specials().unknown);
}

TEST_F(EncodingTest, NaivePresetHasTwoTokensPerLabelAndSixWordVocabulary) {
    const auto pvp = verbalize(naive_pvp(), tok);
    for (Label l : kAllLabels) EXPECT_EQ(pvp.verbalizer_token_ids[index_of(l)].size(), 2u);
    ASSERT_EQ(pvp.vocab_size(), 6u);
    std::vector<std::string> pieces;
    for (TokenId id : pvp.verbalizer_vocab) pieces.push_back(tok.piece(id));
    std::sort(pieces.begin(), pieces.end());
    EXPECT_EQ(pieces, (std::vector<std::string>{"Satz", "argument", "claim", "für", "gegen", "ohne"}));
}

TEST_F(EncodingTest, ElaboratePresetLengths) {
    const auto pvp = verbalize(elaborate_pvp(), tok);
    const std::array<std::size_t, kLabelCount> expected = {3, 3, 1, 3, 3};
    for (Label l : kAllLabels) EXPECT_EQ(pvp.verbalizer_token_ids[index_of(l)].size(), expected[index_of(l)]);
    EXPECT_EQ(pvp.mask_count(), 3u);
}

TEST_F(EncodingTest, SharedTokensShareVocabularyIndex) {
    const auto pvp = verbalize(naive_pvp(), tok);
    EXPECT_EQ(pvp.verbalizer_slots[index_of(Label::argument_for)][0],
              pvp.verbalizer_slots[index_of(Label::argument_against)][0]);
    EXPECT_EQ(pvp.verbalizer_slots[index_of(Label::argument_for)][1],
              pvp.verbalizer_slots[index_of(Label::claim_for)][1]);
}

TEST_F(EncodingTest, NaivePresetRejectsTokenizerThatSplitsDifferently) {
    // "argument" missing: the verbalizer falls back to <unk>
    SubwordTokenizer narrow({"claim", "Satz", "für", "gegen", "ohne"});
    EXPECT_THROW(verbalize(naive_pvp(), narrow), ValidationError);
    // three pieces for "argument"
    SubwordTokenizer split({"arg", "##um", "##ent", "claim", "Satz", "für", "gegen", "ohne"});
    EXPECT_THROW(verbalize(naive_pvp(), split), ValidationError);
}

TEST_F(EncodingTest, MaskCountMustMatchLongestVerbalizer) {
    auto pvp = naive_pvp();
    pvp.pattern = "Dies ist ein <mask> Satz: [Input]";
    EXPECT_THROW(verbalize(pvp, tok), ValidationError);
}

TEST_F(EncodingTest, PatternWithoutSlotIsConfigError) {
    std::map<std::string, std::string> cfg = {{"pattern", "Dies ist <mask> <mask>"}};
    for (Label l : kAllLabels) cfg["verbalizer." + std::string(to_string(l))] = "Satz ohne";
    EXPECT_THROW(pvp_from_config(cfg), ConfigError);
    EXPECT_THROW(pvp_preset("fancy"), ConfigError);
}

TEST_F(EncodingTest, StandardInputWithEmptyContexts) {
    const auto u = make_unit("a", "Satz ohne");
    const auto in = build_standard_input(u, tok, 64);
    const auto target = tok.encode("Satz ohne");
    std::vector<TokenId> expected = {sp.begin};
    expected.insert(expected.end(), target.begin(), target.end());
    expected.insert(expected.end(), {sp.separator, sp.separator, sp.separator});
    EXPECT_EQ(in.ids, expected);
    EXPECT_TRUE(in.mask_positions.empty());
    expect_tiling(in);
}

TEST_F(EncodingTest, StandardInputOrderAndSegments) {
    const auto u = make_unit("a", "ein Satz", Label::claim_for, {"die", "Ukraine"}, {"an"});
    const auto in = build_standard_input(u, tok, 64);
    // <s> ein Satz </s> die Ukraine </s> an </s>
    ASSERT_EQ(in.size(), 9u);
    EXPECT_EQ(tok.piece(in.ids[1]), "ein");
    EXPECT_EQ(tok.piece(in.ids[4]), "die");
    EXPECT_EQ(tok.piece(in.ids[5]), "Ukraine");
    EXPECT_EQ(tok.piece(in.ids[7]), "an");
    expect_tiling(in);
    EXPECT_EQ(in.segments[1], (SegmentSpan{Segment::target, 1, 3}));
    EXPECT_EQ(in.segments[3], (SegmentSpan{Segment::before, 4, 6}));
}

TEST_F(EncodingTest, LongTargetDropsContextsFirst) {
    const std::size_t L = 20;
    const auto u = make_unit("a", words(L - 3), Label::claim_for, {words(4)}, {words(5)});
    const auto in = build_standard_input(u, tok, L);
    EXPECT_EQ(in.size(), L);
    EXPECT_TRUE(in.truncated);
    EXPECT_FALSE(in.target_truncated);
    for (const auto& s : in.segments) {
        EXPECT_NE(s.kind, Segment::before);
        EXPECT_NE(s.kind, Segment::after);
    }
    const auto target = tok.encode(u.text);
    EXPECT_TRUE(std::equal(target.begin(), target.end(), in.ids.begin() + 1));
}

TEST_F(EncodingTest, AfterContextIsCutBeforeBeforeContext) {
    const auto u = make_unit("a", words(4), Label::claim_for, {words(4)}, {words(6)});
    // 1 + 4 + 1 + 4 + 1 + 6 + 1 = 18; budget 14 leaves 2 after-context tokens
    const auto in = build_standard_input(u, tok, 14);
    EXPECT_EQ(in.size(), 14u);
    ASSERT_EQ(in.segments.size(), 7u);
    EXPECT_EQ(in.segments[5].kind, Segment::after);
    EXPECT_EQ(in.segments[5].end - in.segments[5].begin, 2u);
    EXPECT_FALSE(in.target_truncated);
}

TEST_F(EncodingTest, OverlongTargetIsFlagged) {
    const auto u = make_unit("a", words(30));
    const auto in = build_standard_input(u, tok, 10);
    EXPECT_EQ(in.size(), 10u);
    EXPECT_TRUE(in.target_truncated);
    EXPECT_EQ(in.ids.back(), sp.separator);
}

TEST_F(EncodingTest, TruncationIsPrefixMonotone) {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const auto u = make_unit("a", words(1 + rng.below(12)), Label::claim_for, {words(rng.below(8))},
                                 {words(rng.below(8)), words(rng.below(5))});
        for (std::size_t small = 4; small < 40; small += 3) {
            const auto a = without_last(build_standard_input(u, tok, small).ids);
            const auto b = without_last(build_standard_input(u, tok, small + 1 + rng.below(10)).ids);
            ASSERT_LE(a.size(), b.size());
            EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
        }
    }
}

TEST_F(EncodingTest, TopicInputPrefixesAndNeverCutsTopic) {
    const auto u = make_unit("a", words(10), Label::claim_for, {words(5)}, {words(5)});
    const auto in = build_topic_input("Waffenlieferung Ukraine", u, tok, 12);
    const auto topic = tok.encode("Waffenlieferung Ukraine");
    ASSERT_EQ(in.segments[1].kind, Segment::topic);
    EXPECT_TRUE(std::equal(topic.begin(), topic.end(), in.ids.begin() + 1));
    EXPECT_EQ(in.ids[1 + topic.size()], sp.separator);
    EXPECT_EQ(in.size(), 12u);
    EXPECT_EQ(in.ids, build_topic_input("Waffenlieferung Ukraine", u, tok, 12).ids);
    EXPECT_THROW(build_topic_input("  ", u, tok, 12), ConfigError);
    expect_tiling(in);
}

TEST_F(EncodingTest, PetInputMaskBookkeeping) {
    const auto naive = verbalize(naive_pvp(), tok);
    const auto elaborate = verbalize(elaborate_pvp(), tok);
    const auto u = make_unit("a", words(6), Label::claim_for, {words(3)}, {words(3)});
    for (const auto& [pvp, k] : {std::pair{naive, 2u}, std::pair{elaborate, 3u}}) {
        const auto in = build_pet_input(u, pvp, tok, 64);
        EXPECT_EQ(in.mask_positions.size(), k);
        EXPECT_EQ(count_masks(in, sp.mask), k);
        for (auto p : in.mask_positions) EXPECT_EQ(in.ids[p], sp.mask);
        expect_tiling(in);
    }
    EXPECT_EQ(count_masks(build_standard_input(u, tok, 64), sp.mask), 0u);
}

TEST_F(EncodingTest, PetTruncationKeepsPatternAndMasks) {
    const auto pvp = verbalize(naive_pvp(), tok);
    const auto u = make_unit("a", words(40), Label::claim_for, {words(10)}, {words(10)});
    const auto full = build_pet_input(u, pvp, tok, 200);
    const auto cut = build_pet_input(u, pvp, tok, 20);
    EXPECT_EQ(cut.size(), 20u);
    EXPECT_TRUE(cut.target_truncated);
    EXPECT_EQ(cut.mask_positions, full.mask_positions);
    std::size_t pattern_tokens = 0, pattern_full = 0;
    for (const auto& s : cut.segments) {
        if (s.kind == Segment::pattern) pattern_tokens += s.end - s.begin;
    }
    for (const auto& s : full.segments) {
        if (s.kind == Segment::pattern) pattern_full += s.end - s.begin;
    }
    EXPECT_EQ(pattern_tokens, pattern_full);
}

TEST_F(EncodingTest, PetWithTopicStartsWithTopic) {
    const auto pvp = verbalize(naive_pvp(), tok);
    const auto u = make_unit("a", words(5));
    const auto in = build_pet_input(u, pvp, tok, 64, std::string("Waffenlieferung Ukraine"));
    EXPECT_EQ(in.segments[1].kind, Segment::topic);
    EXPECT_EQ(in.mask_positions.size(), 2u);
    for (auto p : in.mask_positions) EXPECT_EQ(in.ids[p], sp.mask);
}

TEST_F(EncodingTest, PetInputRequiresVerbalizedPair) {
    EXPECT_THROW(build_pet_input(make_unit("a", "x"), naive_pvp(), tok, 64), ConfigError);
}
