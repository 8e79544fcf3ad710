#include <gtest/gtest.h>

#include <sstream>

#include "argmine/errors.hpp"
#include "argmine/training.hpp"
#include "fixtures.hpp"

using namespace argmine;
using argmine::testing::mini_backbone;
using argmine::testing::mini_config;
using argmine::testing::toy_tokenizer;

namespace {

// An encoder that nudges one of its own frozen weights on every forward
// pass, standing in for a bug that writes through the frozen partition.
class LeakyEncoder final : public nn::Backbone {
public:
    explicit LeakyEncoder(const nn::EncoderConfig& cfg) : inner_(cfg) {}
    std::size_t hidden_size() const override { return inner_.hidden_size(); }
    std::size_t layer_count() const override { return inner_.layer_count(); }
    std::size_t vocab_size() const override { return inner_.vocab_size(); }
    std::size_t max_positions() const override { return inner_.max_positions(); }
    nn::Tape::Var encode(nn::Tape& t, const std::vector<TokenId>& ids, const nn::LayerHook& hook) override {
        auto v = inner_.encode(t, ids, hook);
        inner_.parameters().back()->value(0, 0) += 1.0;
        return v;
    }
    nn::Tape::Var lm_logits(nn::Tape& t, nn::Tape::Var h) override { return inner_.lm_logits(t, h); }
    std::vector<nn::Parameter*> parameters() override { return inner_.parameters(); }

private:
    nn::MiniEncoder inner_;
};

TrainConfig quick_config(Variant v, std::size_t epochs) {
    auto cfg = TrainConfig::defaults(v);
    cfg.learning_rate = 1e-2;
    cfg.epochs = epochs;
    cfg.seed = 5;
    return cfg;
}

std::vector<double> flatten(nn::ModelAssembly& m) {
    std::vector<double> out;
    for (auto* p : m.trainable_parameters()) out.insert(out.end(), p->value.data(), p->value.data() + p->value.size());
    return out;
}

}  // namespace

TEST(LrSchedule, WarmupThenLinearDecay) {
    EXPECT_EQ(lr_schedule(0, 100, 1e-3, 0.1), 0.0);
    EXPECT_DOUBLE_EQ(lr_schedule(5, 100, 1e-3, 0.1), 5e-4);
    EXPECT_DOUBLE_EQ(lr_schedule(10, 100, 1e-3, 0.1), 1e-3);
    EXPECT_DOUBLE_EQ(lr_schedule(55, 100, 1e-3, 0.1), 5e-4);
    EXPECT_EQ(lr_schedule(100, 100, 1e-3, 0.1), 0.0);
    EXPECT_DOUBLE_EQ(lr_schedule(0, 10, 1e-3, 0.0), 1e-3);
    EXPECT_THROW(lr_schedule(0, 0, 1e-3, 0.1), ConfigError);
    EXPECT_THROW(lr_schedule(11, 10, 1e-3, 0.1), std::out_of_range);
}

TEST(TrainConfig, PaperDefaults) {
    EXPECT_EQ(TrainConfig::defaults(Variant::ft).learning_rate, 5e-6);
    EXPECT_EQ(TrainConfig::defaults(Variant::ft).epochs, 30u);
    EXPECT_EQ(TrainConfig::defaults(Variant::adapter_pet).learning_rate, 5e-5);
    EXPECT_EQ(TrainConfig::defaults(Variant::pet_full).learning_rate, 1e-5);
    EXPECT_EQ(TrainConfig::defaults(Variant::pet_full).epochs, 10u);
    EXPECT_EQ(TrainConfig::pretraining(Variant::ft_sam).learning_rate, 5e-6);
    EXPECT_EQ(TrainConfig::pretraining(Variant::ft_sam).epochs, 2u);
    auto bad = TrainConfig::defaults(Variant::ft);
    bad.warmup_fraction = 1.0;
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Variants, RoundTripNames) {
    for (Variant v : kAllVariants) EXPECT_EQ(parse_variant(to_string(v)), v);
    EXPECT_FALSE(parse_variant("lora").has_value());
}

TEST(SelectBestEpoch, FirstArgmax) {
    EXPECT_EQ(select_best_epoch({0.2, 0.5, 0.4}), 2u);
    EXPECT_EQ(select_best_epoch({0.5, 0.5}), 1u);
    EXPECT_THROW(select_best_epoch({}), std::invalid_argument);
}

TEST(ClipGradNorm, RescalesAboveThreshold) {
    nn::Parameter a("a", nn::Matrix::Zero(1, 2));
    a.grad << 3.0, 4.0;
    EXPECT_DOUBLE_EQ(clip_grad_norm({&a}, 1.0), 5.0);
    // Same epsilon in the denominator as torch.nn.utils.clip_grad_norm_.
    EXPECT_NEAR(a.grad.norm(), 1.0 / (1.0 + 2e-7), 1e-15);
    const nn::Matrix kept = a.grad;
    clip_grad_norm({&a}, 2.0);
    EXPECT_EQ(a.grad, kept);
}

class TrainingTest : public ::testing::Test {
protected:
    void SetUp() override {
        SyntheticConfig cfg;
        cfg.units = 200;
        cfg.seed = 11;
        data = synthesize_dataset(cfg);
    }

    std::vector<Example> examples(Variant v) { return build_examples(data, v, tok, pvp, 64); }

    nn::ModelAssembly model(Variant v, std::uint64_t seed = 3) {
        return assemble(mini_backbone(tok.vocab_size(), 1), v, pvp, seed, 4);
    }

    SubwordTokenizer tok = toy_tokenizer();
    std::optional<PatternVerbalizerPair> pvp = verbalize(naive_pvp(), tok);
    LabeledDataset data;
};

TEST_F(TrainingTest, LossStrictlyDecreasesOverFirstEpochs) {
    auto m = model(Variant::adapter);
    const auto ex = examples(Variant::adapter);
    auto cfg = quick_config(Variant::adapter, 10);
    cfg.learning_rate = 3e-3;
    const auto log = train(m, TrainData{&ex}, cfg);
    ASSERT_EQ(log.epochs.size(), 10u);
    for (std::size_t e = 1; e < 5; ++e) EXPECT_LT(log.epochs[e].loss, log.epochs[e - 1].loss) << "epoch " << e + 1;
}

TEST_F(TrainingTest, LoggedRatesFollowSchedule) {
    auto m = model(Variant::adapter);
    const auto ex = examples(Variant::adapter);
    const auto cfg = quick_config(Variant::adapter, 3);
    const auto log = train(m, TrainData{&ex}, cfg);
    EXPECT_EQ(log.total_steps, 3 * ((ex.size() + 15) / 16));
    ASSERT_EQ(log.step_lrs.size(), log.total_steps);
    for (std::size_t s = 0; s < log.total_steps; ++s) {
        EXPECT_EQ(log.step_lrs[s], lr_schedule(s, log.total_steps, cfg.learning_rate, cfg.warmup_fraction));
    }
    std::ostringstream csv;
    write_train_log_csv(csv, log);
    EXPECT_EQ(csv.str().substr(0, 22), "epoch,loss,lr,seconds\n");
}

TEST_F(TrainingTest, SameSeedIsBitIdentical) {
    const auto ex = examples(Variant::adapter_pet);
    auto a = model(Variant::adapter_pet);
    auto b = model(Variant::adapter_pet);
    const auto la = train(a, TrainData{&ex}, quick_config(Variant::adapter_pet, 2));
    const auto lb = train(b, TrainData{&ex}, quick_config(Variant::adapter_pet, 2));
    EXPECT_EQ(flatten(a), flatten(b));
    EXPECT_EQ(la.epochs[1].loss, lb.epochs[1].loss);

    auto c = model(Variant::adapter_pet);
    auto cfg = quick_config(Variant::adapter_pet, 2);
    cfg.seed = 6;
    train(c, TrainData{&ex}, cfg);
    EXPECT_NE(flatten(a), flatten(c));
}

TEST_F(TrainingTest, FrozenBackboneUntouchedByAdapterTraining) {
    for (Variant v : {Variant::adapter, Variant::adapter_pet}) {
        auto m = model(v);
        std::vector<nn::Matrix> before;
        for (const auto* p : m.backbone().parameters()) before.push_back(p->value);
        const auto ex = examples(v);
        train(m, TrainData{&ex}, quick_config(v, 2));
        const auto after = m.backbone().parameters();
        for (std::size_t i = 0; i < after.size(); ++i) EXPECT_EQ(after[i]->value, before[i]) << after[i]->name;
    }
}

TEST_F(TrainingTest, FrozenWriteIsDetected) {
    nn::ModelAssembly m(std::make_unique<LeakyEncoder>(mini_config(tok.vocab_size(), 1)));
    m.add_adapter({"task", 4}, 1);
    m.set_standard_head(kLabelCount, 1);
    const auto ex = examples(Variant::adapter);
    EXPECT_THROW(train(m, TrainData{&ex}, quick_config(Variant::adapter, 1)), InvariantError);
}

TEST_F(TrainingTest, BestEpochParametersAreRestored) {
    auto m = model(Variant::adapter);
    const auto ex = examples(Variant::adapter);
    std::vector<Example> dev(ex.begin(), ex.begin() + 40);
    auto cfg = quick_config(Variant::adapter, 6);
    cfg.best_epoch_selection = true;
    const auto log = train(m, TrainData{&ex, &dev}, cfg);
    std::vector<double> trace;
    for (const auto& e : log.epochs) trace.push_back(*e.dev_macro_f1);
    EXPECT_EQ(log.best_epoch, select_best_epoch(trace));
    EXPECT_EQ(evaluate(m, dev).macro_f1, trace[log.best_epoch - 1]);

    auto no_dev = model(Variant::adapter);
    EXPECT_THROW(train(no_dev, TrainData{&ex}, cfg), ConfigError);
}

TEST_F(TrainingTest, PetFullMixesLanguageModelTerm) {
    auto m = model(Variant::pet_full);
    EXPECT_EQ(m.head_kind(), nn::HeadKind::masked_lm);
    const auto ex = examples(Variant::pet_full);
    std::vector<std::vector<TokenId>> unlabeled;
    for (const auto& u : data.units) unlabeled.push_back(build_standard_input(u, tok, 64).ids);
    auto cfg = quick_config(Variant::pet_full, 1);
    cfg.learning_rate = 1e-3;
    const auto with_lm = train(m, TrainData{&ex, nullptr, &unlabeled}, cfg);
    auto m2 = model(Variant::pet_full);
    const auto without = train(m2, TrainData{&ex}, cfg);
    EXPECT_NE(flatten(m), flatten(m2));
    EXPECT_EQ(with_lm.report.trainable, with_lm.report.total);
    (void)without;
}

TEST_F(TrainingTest, NearDomainPretrainingRequiresThreeClasses) {
    const auto stance = build_stance_examples(synthesize_stance(60, 2), tok, 64);
    auto wrong = model(Variant::adapter);
    EXPECT_THROW(pretrain_near_domain(wrong, stance, TrainConfig::pretraining(Variant::adapter_sam)), ConfigError);

    auto m = model(Variant::adapter_sam);
    const auto task = examples(Variant::adapter_sam);
    EXPECT_THROW(pretrain_near_domain(m, task, TrainConfig::pretraining(Variant::adapter_sam)), ConfigError);
}

TEST_F(TrainingTest, StackedAdapterVariantFreezesPretrainedAdapter) {
    auto m = model(Variant::adapter_sam_pet);
    const auto stance = build_stance_examples(synthesize_stance(60, 2), tok, 64);
    auto pcfg = TrainConfig::pretraining(Variant::adapter_sam_pet);
    pcfg.learning_rate = 1e-2;
    pretrain_near_domain(m, stance, pcfg);
    continue_after_pretraining(m, Variant::adapter_sam_pet, pvp, 3);
    ASSERT_EQ(m.adapters().size(), 2u);
    EXPECT_EQ(m.adapters()[0].name(), "sam");
    EXPECT_FALSE(m.adapters()[0].trainable());
    EXPECT_EQ(m.head_kind(), nn::HeadKind::pet);
    for (const auto& name : m.trainable_partition()) {
        EXPECT_TRUE(name.rfind("adapter.task.", 0) == 0 || name.rfind("head.pet", 0) == 0) << name;
    }
    const auto sam_hash = frozen_hash(m);
    const auto ex = examples(Variant::adapter_sam_pet);
    train(m, TrainData{&ex}, quick_config(Variant::adapter_sam_pet, 1));
    EXPECT_EQ(frozen_hash(m), sam_hash);
}

TEST_F(TrainingTest, ExamplesFollowVariantInputs) {
    const auto& u = data.units.front();
    const auto topic = std::string(kTaskTopic);
    EXPECT_EQ(examples(Variant::ft)[0].input.ids, build_standard_input(u, tok, 64).ids);
    EXPECT_EQ(examples(Variant::ft_sam)[0].input.ids, build_topic_input(topic, u, tok, 64).ids);
    EXPECT_EQ(examples(Variant::adapter_pet)[0].input.ids, build_pet_input(u, *pvp, tok, 64).ids);
    EXPECT_EQ(examples(Variant::adapter_sam_pet)[0].input.ids, build_pet_input(u, *pvp, tok, 64, topic).ids);
    EXPECT_EQ(examples(Variant::ft)[0].target, index_of(u.label));
}
