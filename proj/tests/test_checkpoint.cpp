#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "argmine/checkpoint.hpp"
#include "argmine/errors.hpp"
#include "fixtures.hpp"

using namespace argmine;
using namespace argmine::nn;
using argmine::testing::make_unit;
using argmine::testing::mini_backbone;
using argmine::testing::mini_config;
using argmine::testing::randomize;
using argmine::testing::toy_tokenizer;

namespace fs = std::filesystem;

class CheckpointTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fs::path(::testing::TempDir()) / ("argmine_ckpt_" + std::string(
            ::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    ModelAssembly adapter_pet(std::uint64_t seed) {
        ModelAssembly m(mini_backbone(tok.vocab_size(), 1));
        m.add_adapter({"task", 4}, seed);
        m.set_pet_head(pvp, seed);
        return m;
    }

    fs::path dir;
    SubwordTokenizer tok = toy_tokenizer();
    PatternVerbalizerPair pvp = verbalize(naive_pvp(), tok);
};

TEST_F(CheckpointTest, RoundTripIsBitExact) {
    auto m = adapter_pet(3);
    randomize(m.trainable_parameters(), 0.1, 4);
    const auto in = build_pet_input(make_unit("u", "ein Satz an die Ukraine"), pvp, tok, 64);
    const auto before = m.predict_logits(in);

    const auto info = serialize_trainable(m, dir / "m.ckpt");
    auto other = adapter_pet(99);
    EXPECT_NE(other.predict_logits(in), before);
    deserialize_trainable(dir / "m.ckpt", other);

    EXPECT_EQ(other.predict_logits(in), before);
    const auto a = m.trainable_parameters();
    const auto b = other.trainable_parameters();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i]->value, b[i]->value) << a[i]->name;
    EXPECT_EQ(info.tensors.size(), a.size());
}

TEST_F(CheckpointTest, SizeIsFourBytesPerTrainableValuePlusHeader) {
    auto m = adapter_pet(3);
    const auto info = serialize_trainable(m, dir / "m.ckpt");
    const auto report = count_parameters(m);
    EXPECT_EQ(info.payload_bytes, report.serialized_bytes_fp32);
    EXPECT_EQ(fs::file_size(dir / "m.ckpt"), info.header_bytes + info.payload_bytes);
    EXPECT_LT(info.header_bytes, 16u + 200u * info.tensors.size());
    for (const auto& e : info.tensors) {
        EXPECT_EQ(e.role, "trainable");
        EXPECT_NE(e.component, "backbone");
    }
}

TEST_F(CheckpointTest, MismatchedHiddenSizeNamesTensor) {
    auto m = adapter_pet(3);
    serialize_trainable(m, dir / "m.ckpt");
    auto cfg = mini_config(tok.vocab_size(), 1);
    cfg.hidden = 64;
    ModelAssembly wide(std::make_unique<MiniEncoder>(cfg));
    wide.add_adapter({"task", 4}, 3);
    wide.set_pet_head(pvp, 3);
    try {
        deserialize_trainable(dir / "m.ckpt", wide);
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        EXPECT_NE(std::string(e.what()).find("adapter.task"), std::string::npos) << e.what();
    }
}

TEST_F(CheckpointTest, MissingTensorIsAnError) {
    ModelAssembly m(mini_backbone(tok.vocab_size(), 1));
    m.add_adapter({"task", 4}, 3);
    m.set_standard_head(kLabelCount, 3);
    serialize_trainable(m, dir / "m.ckpt");
    auto pet = adapter_pet(3);
    EXPECT_THROW(deserialize_trainable(dir / "m.ckpt", pet), ShapeError);
}

TEST_F(CheckpointTest, RejectsNonFp32Values) {
    auto m = adapter_pet(3);
    m.trainable_parameters().front()->value(0, 0) = 0.1;
    EXPECT_THROW(serialize_trainable(m, dir / "m.ckpt"), ValidationError);
}

TEST_F(CheckpointTest, RejectsForeignFiles) {
    std::ofstream(dir / "junk.ckpt") << "definitely not a checkpoint";
    auto m = adapter_pet(3);
    EXPECT_THROW(deserialize_trainable(dir / "junk.ckpt", m), LoadError);
    EXPECT_THROW(read_checkpoint_info(dir / "missing.ckpt"), LoadError);
}

TEST_F(CheckpointTest, LoadMatchingRestoresFrozenLowerAdapter) {
    auto m = adapter_pet(3);
    randomize(m.trainable_parameters(), 0.1, 4);
    serialize_trainable(m, dir / "m.ckpt");
    auto other = adapter_pet(8);
    other.adapters()[0].set_trainable(false);
    EXPECT_EQ(load_matching(dir / "m.ckpt", other.parameters()), m.trainable_parameters().size());
    EXPECT_EQ(other.adapters()[0].parameters()[0]->value, m.adapters()[0].parameters()[0]->value);
}
