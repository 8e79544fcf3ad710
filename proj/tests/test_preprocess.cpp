#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "argmine/preprocess.hpp"
#include "argmine/rng.hpp"
#include "fixtures.hpp"

using namespace argmine;
using argmine::testing::make_unit;

namespace {

LabeledDataset dataset_with_sizes(const LabelCounts& sizes) {
    LabeledDataset ds;
    for (Label l : kAllLabels) {
        for (std::size_t i = 0; i < sizes[index_of(l)]; ++i) {
            ds.units.push_back(make_unit(std::string(to_string(l)) + "-" + std::to_string(i), "text", l));
        }
    }
    return ds;
}

std::multiset<Label> label_multiset(const LabeledDataset& ds) {
    std::multiset<Label> out;
    for (const auto& u : ds.units) out.insert(u.label);
    return out;
}

std::string dump(const LabeledDataset& ds) {
    std::ostringstream out;
    write_dataset(out, ds);
    return out.str();
}

// Cut every recognized span out of a string; the remainder must survive a
// shuffle unchanged.
std::string skeleton(const std::string& s, const PersonRecognizer& r) {
    std::string out;
    std::size_t at = 0;
    for (const auto& span : r.recognize(s)) {
        out += s.substr(at, span.start - at) + "#";
        at = span.end;
    }
    return out + s.substr(at);
}

}  // namespace

TEST(DictionaryRecognizer, LongestMatchOnWordBoundaries) {
    DictionaryRecognizer r({"Scholz", "Olaf Scholz", "Merz"});
    const auto spans = r.recognize("Olaf Scholz trifft Merzig und Merz.");
    ASSERT_EQ(spans.size(), 2u);
    EXPECT_EQ(spans[0].surface, "Olaf Scholz");
    EXPECT_EQ(spans[0].start, 0u);
    EXPECT_EQ(spans[1].surface, "Merz");
}

TEST(ShufflePersons, SingleEntityPoolMapsEverythingToIt) {
    LabeledDataset ds;
    ds.units.push_back(make_unit("a", "Scholz sagt ja.", Label::claim_for, {"Gestern sprach Scholz."}));
    ds.units.push_back(make_unit("b", "Ohne Namen.", Label::no_stance));
    DictionaryRecognizer r({"Scholz"});
    const auto out = shuffle_persons(ds, r, 3);
    EXPECT_EQ(out.pool, std::vector<std::string>{"Scholz"});
    EXPECT_EQ(out.replaced_spans, 2u);
    EXPECT_EQ(out.dataset, ds);
}

TEST(ShufflePersons, RepeatedSurfaceSharesOneDraw) {
    const std::vector<std::string> names = {"Baerbock", "Scholz", "Merz", "Lindner", "Habeck"};
    DictionaryRecognizer r(names);
    LabeledDataset ds;
    for (int i = 0; i < 40; ++i) {
        ds.units.push_back(make_unit("u" + std::to_string(i), "Baerbock sagt, Baerbock habe recht.",
                                     Label::claim_for, {"Scholz widerspricht."}, {"Baerbock nickt."}));
    }
    ds.units.push_back(make_unit("pool", "Merz Lindner Habeck", Label::no_stance));
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto out = shuffle_persons(ds, r, seed);
        std::set<std::string> first_names;
        for (int i = 0; i < 40; ++i) {
            const auto& u = out.dataset.units[static_cast<std::size_t>(i)];
            const auto spans = r.recognize(u.text);
            ASSERT_EQ(spans.size(), 2u);
            EXPECT_EQ(spans[0].surface, spans[1].surface);
            const auto after = r.recognize(u.context_after[0]);
            ASSERT_EQ(after.size(), 1u);
            EXPECT_EQ(after[0].surface, spans[0].surface);
            first_names.insert(spans[0].surface);
        }
        // resampled across units
        EXPECT_GT(first_names.size(), 1u);
    }
}

TEST(ShufflePersons, DeterministicAndLabelPreserving) {
    SyntheticConfig cfg;
    cfg.units = 120;
    cfg.seed = 4;
    const auto ds = synthesize_dataset(cfg);
    DictionaryRecognizer r(synthetic_person_names());
    const auto a = shuffle_persons(ds, r, 9);
    const auto b = shuffle_persons(ds, r, 9);
    EXPECT_EQ(dump(a.dataset), dump(b.dataset));
    EXPECT_GT(a.replaced_spans, 0u);
    EXPECT_EQ(label_multiset(a.dataset), label_multiset(ds));
    for (std::size_t i = 0; i < ds.size(); ++i) {
        EXPECT_EQ(skeleton(a.dataset.units[i].text, r), skeleton(ds.units[i].text, r));
        EXPECT_EQ(a.dataset.units[i].label, ds.units[i].label);
    }
}

TEST(ShufflePersons, EmptyPoolLeavesDatasetUnchanged) {
    LabeledDataset ds;
    ds.units.push_back(make_unit("a", "Niemand hier.", Label::claim_for));
    DictionaryRecognizer r({"Scholz"});
    const auto out = shuffle_persons(ds, r, 1);
    EXPECT_TRUE(out.empty_pool);
    EXPECT_EQ(out.dataset, ds);
}

TEST(SwapOnion, FlipsFlaggedStanceKeepsConcept) {
    LabeledDataset ds;
    auto a = make_unit("a", "x", Label::claim_for);
    a.onion = true;
    auto b = make_unit("b", "x", Label::argument_against);
    auto c = make_unit("c", "x", Label::argument_against);
    c.onion = true;
    ds.units = {a, b, c, make_unit("d", "x", Label::no_stance)};
    const auto out = swap_onion(ds);
    EXPECT_EQ(out.units[0].label, Label::claim_against);
    EXPECT_EQ(out.units[1].label, Label::argument_against);
    EXPECT_EQ(out.units[2].label, Label::argument_for);
    EXPECT_EQ(out.units[3].label, Label::no_stance);
    EXPECT_EQ(swap_onion(out), ds);
}

TEST(StratifiedCounts, ReproducesOriginalFewShotTable) {
    const LabelCounts sizes = {46, 45, 101, 81, 1091};
    const std::map<double, LabelCounts> table = {
        {0.025, {1, 1, 2, 2, 27}},     {0.05, {2, 2, 5, 4, 54}},      {0.1, {4, 4, 10, 8, 109}},
        {0.2, {9, 9, 20, 16, 218}},    {0.3, {13, 13, 30, 24, 327}},  {0.5, {23, 22, 50, 40, 545}},
        {0.7, {32, 31, 70, 56, 763}},  {1.0, {46, 45, 101, 81, 1091}},
    };
    for (const auto& [p, expected] : table) EXPECT_EQ(stratified_counts(sizes, p), expected) << p;
}

TEST(StratifiedCounts, MinimumOneForNonEmptyClass) {
    const LabelCounts sizes = {3, 0, 10, 1, 100};
    const LabelCounts got = stratified_counts(sizes, 0.025);
    EXPECT_EQ(got, (LabelCounts{1, 0, 1, 1, 2}));
}

TEST(SampleStratified, SubsetWithExactCounts) {
    const auto train = dataset_with_sizes({46, 45, 101, 81, 1091});
    std::set<std::string> ids;
    for (const auto& u : train.units) ids.insert(u.unit_id);
    for (double p : kSweepProportions) {
        const auto s = sample_stratified(train, p, 7);
        EXPECT_EQ(count_labels(s), stratified_counts(count_labels(train), p));
        for (const auto& u : s.units) EXPECT_TRUE(ids.count(u.unit_id));
        EXPECT_EQ(s, sample_stratified(train, p, 7));
    }
    EXPECT_EQ(sample_stratified(train, 1.0, 3), train);
}

TEST(SampleStratified, EmptyTrainThrows) {
    EXPECT_THROW(sample_stratified(LabeledDataset{}, 0.5, 1), std::invalid_argument);
}

TEST(SampleTfs, SizeAndFullProportion) {
    const auto train = dataset_with_sizes({46, 45, 101, 81, 1091});
    EXPECT_EQ(train.size(), 1364u);
    EXPECT_EQ(sample_tfs(train, 0.5, 1).size(), 682u);
    EXPECT_EQ(sample_tfs(train, 1.0, 1).size(), 1364u);
    EXPECT_THROW(sample_tfs(train, 0.0001, 1), std::invalid_argument);
}

TEST(SampleTfs, ClassCountsFollowHypergeometricMean) {
    const LabelCounts sizes = {46, 45, 101, 81, 1091};
    const auto train = dataset_with_sizes(sizes);
    const double N = 1364, n = 682;
    const int seeds = 200;
    std::array<double, kLabelCount> sum{};
    std::array<std::set<std::size_t>, kLabelCount> seen;
    for (int s = 0; s < seeds; ++s) {
        const auto counts = count_labels(sample_tfs(train, 0.5, static_cast<std::uint64_t>(s)));
        for (std::size_t c = 0; c < kLabelCount; ++c) {
            sum[c] += static_cast<double>(counts[c]);
            seen[c].insert(counts[c]);
        }
    }
    for (std::size_t c = 0; c < kLabelCount; ++c) {
        const double K = static_cast<double>(sizes[c]);
        const double mean = n * K / N;
        const double var = n * (K / N) * (1 - K / N) * (N - n) / (N - 1);
        const double se = std::sqrt(var / seeds);
        EXPECT_NEAR(sum[c] / seeds, mean, 3 * se) << c;
        EXPECT_GT(seen[c].size(), 1u) << "class counts never varied";
    }
}

TEST(SampleTfs, DifferentSeedsGiveDifferentSamples) {
    const auto train = dataset_with_sizes({46, 45, 101, 81, 1091});
    std::set<std::string> dumps;
    for (std::uint64_t s = 0; s < 10; ++s) dumps.insert(dump(sample_tfs(train, 0.5, s)));
    EXPECT_EQ(dumps.size(), 10u);
}

TEST(FewShotPlan, FlagsOffGridProportions) {
    FewShotPlan plan;
    plan.proportion = 0.05;
    EXPECT_TRUE(plan.on_sweep_grid());
    plan.proportion = 0.15;
    EXPECT_FALSE(plan.on_sweep_grid());
}
