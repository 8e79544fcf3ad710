#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "argmine/errors.hpp"
#include "argmine/model.hpp"
#include "fixtures.hpp"

using namespace argmine;
using namespace argmine::nn;
using argmine::testing::make_unit;
using argmine::testing::mini_backbone;
using argmine::testing::randomize;
using argmine::testing::toy_tokenizer;

namespace {

std::size_t enumerate(const std::vector<Parameter*>& params) {
    std::size_t n = 0;
    for (const auto* p : params) n += static_cast<std::size_t>(p->value.rows() * p->value.cols());
    return n;
}

std::size_t index_of_piece(const PatternVerbalizerPair& pvp, const Tokenizer& tok, const std::string& piece) {
    for (std::size_t i = 0; i < pvp.verbalizer_vocab.size(); ++i) {
        if (tok.piece(pvp.verbalizer_vocab[i]) == piece) return i;
    }
    throw std::runtime_error("piece not in verbalizer vocabulary: " + piece);
}

}  // namespace

TEST(ParameterCounts, AdapterAtPaperScale) {
    EXPECT_EQ(adapter_parameter_count(1024, 16, 24), 3'171'840u);
    Adapter a({"task", 16}, 1024, 24, 1);
    EXPECT_EQ(a.bottleneck(), 64u);
    EXPECT_EQ(enumerate(a.parameters()), 3'171'840u);
}

TEST(ParameterCounts, PetHeadAtPaperScale) {
    EXPECT_EQ(pet_head_parameter_count(1024, 6), 1'057'798u);
    PetHead h("head.pet", 1024, 6, 1);
    EXPECT_EQ(enumerate(h.parameters()), 1'057'798u);
}

TEST(ParameterCounts, MiniatureBottleneckWidth) {
    Adapter a({"task", 16}, 32, 2, 1);
    EXPECT_EQ(a.bottleneck(), 2u);
    EXPECT_THROW(Adapter({"task", 5}, 32, 2, 1), ConfigError);
}

class ModelTest : public ::testing::Test {
protected:
    SubwordTokenizer tok = toy_tokenizer();
    PatternVerbalizerPair pvp = verbalize(naive_pvp(), tok);
    SentenceUnit unit = make_unit("u", "ein Satz an die Ukraine", Label::claim_for, {"Dies ist"}, {"die"});

    ModelAssembly fresh(std::uint64_t seed = 1) { return ModelAssembly(mini_backbone(tok.vocab_size(), seed)); }
};

TEST_F(ModelTest, ZeroUpProjectionIsIdentity) {
    Adapter a({"task", 4}, 32, 2, 3);
    const Matrix h = random_normal(5, 32, 1.0, 4);
    EXPECT_EQ(a.apply(0, h), h);
    EXPECT_EQ(a.apply(1, h), h);
    randomize(a.parameters(), 0.1, 5);
    EXPECT_NE(a.apply(0, h), h);
    EXPECT_THROW(a.apply(0, random_normal(5, 16, 1.0, 4)), ShapeError);
}

TEST_F(ModelTest, FreshAdapterLeavesBackboneFunctionUnchanged) {
    const auto in = build_standard_input(unit, tok, 64);
    auto plain = fresh(9);
    plain.set_standard_head(kLabelCount, 2);
    auto adapted = fresh(9);
    adapted.add_adapter({"task", 4}, 77);
    adapted.set_standard_head(kLabelCount, 2);
    EXPECT_EQ(plain.predict_logits(in), adapted.predict_logits(in));
}

TEST_F(ModelTest, AdapterFreezesBackbone) {
    auto m = fresh();
    m.set_standard_head(kLabelCount, 1);
    auto full = count_parameters(m);
    EXPECT_EQ(full.trainable, full.total);

    m.add_adapter({"task", 4}, 2);
    for (const auto* p : m.backbone().parameters()) EXPECT_FALSE(p->trainable) << p->name;
    const auto partition = m.trainable_partition();
    for (const auto& name : partition) {
        EXPECT_TRUE(name.rfind("adapter.task.", 0) == 0 || name.rfind("head.", 0) == 0) << name;
    }
    const auto r = count_parameters(m);
    EXPECT_EQ(r.trainable, adapter_parameter_count(32, 4, 2) + 32 * kLabelCount + kLabelCount);
    EXPECT_EQ(r.serialized_bytes_fp32, 4 * r.trainable);
    std::size_t sum = 0;
    for (const auto& [name, n] : r.by_component) sum += n;
    EXPECT_EQ(sum, r.total);
    EXPECT_EQ(r.by_component.at("adapter.task"), adapter_parameter_count(32, 4, 2));
}

TEST_F(ModelTest, StandardHeadShapeAndZeroWeights) {
    auto m = fresh();
    m.set_standard_head(kLabelCount, 1);
    for (auto* p : m.trainable_parameters()) {
        if (p->name.rfind("head.", 0) == 0) p->value.setZero();
    }
    for (std::size_t len : {3u, 8u, 30u}) {
        const auto in = build_standard_input(make_unit("x", "Satz ein die an Ukraine Dies ist Satz"), tok, len + 2);
        const auto logits = m.predict_logits(in);
        ASSERT_EQ(logits.size(), kLabelCount);
        for (double l : logits) EXPECT_EQ(l, 0.0);
    }
}

TEST_F(ModelTest, PetSumMatchesHandExample) {
    Matrix per_mask = Matrix::Zero(2, 6);
    per_mask(0, index_of_piece(pvp, tok, "argument")) = 2;
    per_mask(0, index_of_piece(pvp, tok, "claim")) = 1;
    per_mask(1, index_of_piece(pvp, tok, "für")) = 3;
    per_mask(1, index_of_piece(pvp, tok, "gegen")) = 1;
    const Matrix logits = sum_verbalizer_logits(per_mask, pvp);
    EXPECT_EQ(logits(0, index_of(Label::argument_for)), 5.0);
    EXPECT_EQ(logits(0, index_of(Label::claim_against)), 2.0);
    EXPECT_EQ(logits(0, index_of(Label::no_stance)), 0.0);
}

TEST_F(ModelTest, ElaborateSumIgnoresSurplusMasks) {
    const auto ela = verbalize(elaborate_pvp(), tok);
    Matrix per_mask = random_normal(3, ela.vocab_size(), 1.0, 8);
    const Matrix logits = sum_verbalizer_logits(per_mask, ela);
    const auto slot = ela.verbalizer_slots[index_of(Label::claim_for)];
    ASSERT_EQ(slot.size(), 1u);
    EXPECT_EQ(logits(0, index_of(Label::claim_for)), per_mask(0, slot[0]));
    const auto& af = ela.verbalizer_slots[index_of(Label::argument_for)];
    EXPECT_EQ(logits(0, index_of(Label::argument_for)),
              per_mask(0, af[0]) + per_mask(1, af[1]) + per_mask(2, af[2]));
}

TEST_F(ModelTest, PetSumIsEquivariantUnderVocabularyReordering) {
    Matrix per_mask = random_normal(2, 6, 1.0, 3);
    const Matrix base = sum_verbalizer_logits(per_mask, pvp);
    std::vector<std::size_t> perm = {3, 0, 5, 1, 4, 2};  // new position of old index i
    auto shuffled = pvp;
    for (std::size_t i = 0; i < 6; ++i) shuffled.verbalizer_vocab[perm[i]] = pvp.verbalizer_vocab[i];
    for (auto& slots : shuffled.verbalizer_slots) {
        for (auto& s : slots) s = perm[s];
    }
    Matrix moved(2, 6);
    for (std::size_t i = 0; i < 6; ++i) moved.col(static_cast<Eigen::Index>(perm[i])) = per_mask.col(static_cast<Eigen::Index>(i));
    EXPECT_EQ(sum_verbalizer_logits(moved, shuffled), base);
}

TEST_F(ModelTest, PetHeadZeroEmitGivesTies) {
    auto m = fresh();
    m.add_adapter({"task", 4}, 1);
    m.set_pet_head(pvp, 2);
    for (auto* p : m.trainable_parameters()) {
        if (p->name.find("emit") != std::string::npos) p->value.setZero();
    }
    const auto logits = m.predict_logits(build_pet_input(unit, pvp, tok, 64));
    ASSERT_EQ(logits.size(), kLabelCount);
    for (double l : logits) EXPECT_EQ(l, logits[0]);
}

TEST_F(ModelTest, PetHeadRejectsWrongMaskCount) {
    auto m = fresh();
    m.set_pet_head(pvp, 2);
    auto in = build_pet_input(unit, pvp, tok, 64);
    in.mask_positions.pop_back();
    EXPECT_THROW(m.predict(in), ShapeError);
}

TEST_F(ModelTest, StackedAdaptersPartitionAndIdentityStart) {
    const auto in = build_standard_input(unit, tok, 64);
    auto lower_only = fresh(4);
    auto& lower = lower_only.add_adapter({"sam", 4}, 5);
    randomize(lower.parameters(), 0.1, 6);
    lower_only.set_standard_head(kLabelCount, 7);
    const auto reference = lower_only.predict_logits(in);

    auto stacked = fresh(4);
    stacked.add_adapter({"sam", 4}, 5);
    randomize(stacked.adapters()[0].parameters(), 0.1, 6);
    auto taken = stacked.take_adapter("sam");
    ASSERT_TRUE(taken.has_value());
    stacked.stack_adapters(std::move(*taken), {"task", 4}, 8);
    stacked.set_standard_head(kLabelCount, 7);

    EXPECT_EQ(stacked.predict_logits(in), reference);
    for (const auto& name : stacked.trainable_partition()) {
        EXPECT_TRUE(name.rfind("adapter.task.", 0) == 0 || name.rfind("head.", 0) == 0) << name;
    }
    const auto r = count_parameters(stacked);
    EXPECT_EQ(r.by_component.at("adapter.sam") + r.by_component.at("adapter.task"),
              2 * adapter_parameter_count(32, 4, 2));
}

TEST_F(ModelTest, StackingRejectsMismatchedShapes) {
    auto m = fresh();
    Adapter wrong({"sam", 4}, 64, 2, 1);
    EXPECT_THROW(m.stack_adapters(std::move(wrong), {"task", 4}, 2), ShapeError);
}

TEST_F(ModelTest, CountTensorsMatchesEnumeration) {
    auto m = fresh();
    m.add_adapter({"task", 4}, 1);
    m.set_pet_head(pvp, 1);
    const auto r = count_parameters(m);
    EXPECT_EQ(r.total, enumerate(m.parameters()));
    EXPECT_EQ(r.trainable, enumerate(m.trainable_parameters()));
    EXPECT_EQ(r.by_component.at("head.pet"), pet_head_parameter_count(32, 6));
}

TEST_F(ModelTest, MaskedLmHeadScoresVerbalizerTokens) {
    auto m = fresh();
    m.set_masked_lm_head(pvp);
    EXPECT_EQ(m.head_kind(), HeadKind::masked_lm);
    EXPECT_EQ(m.predict_logits(build_pet_input(unit, pvp, tok, 64)).size(), kLabelCount);
}

TEST_F(ModelTest, ParameterHashTracksValues) {
    auto m = fresh();
    m.set_standard_head(kLabelCount, 1);
    std::vector<const Parameter*> ps;
    for (auto* p : m.parameters()) ps.push_back(p);
    const auto h = parameter_hash(ps);
    EXPECT_EQ(h, parameter_hash(ps));
    m.parameters().front()->value(0, 0) += 1.0;
    EXPECT_NE(h, parameter_hash(ps));
}
