#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "argmine/evaluation.hpp"
#include "argmine/model.hpp"

namespace argmine {

enum class Variant { ft, ft_sam, adapter, adapter_sam, pet_full, adapter_pet, adapter_sam_pet };

inline constexpr std::array<Variant, 7> kAllVariants = {
    Variant::ft,      Variant::ft_sam,      Variant::adapter,        Variant::adapter_sam,
    Variant::pet_full, Variant::adapter_pet, Variant::adapter_sam_pet};

std::string_view to_string(Variant v);
std::optional<Variant> parse_variant(std::string_view s);

bool uses_adapter(Variant v);
bool uses_near_domain(Variant v);
bool uses_pattern(Variant v);

// Topic label for SAM-style inputs on the task data.
inline constexpr std::string_view kTaskTopic = "Waffenlieferung Ukraine";

struct TrainConfig {
    Variant variant = Variant::adapter;
    double learning_rate = 5e-5;
    std::size_t epochs = 30;
    std::size_t batch_size = 16;
    double warmup_fraction = 0.1;
    std::uint64_t seed = 0;
    bool best_epoch_selection = false;
    double lm_loss_weight = 1e-4;  // pet_full only
    double mlm_probability = 0.15;
    double weight_decay = 0.01;
    double clip_norm = 1.0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    static TrainConfig defaults(Variant v);
    // Near-domain stance pretraining (lr 5e-6, 2 epochs).
    static TrainConfig pretraining(Variant v);

    // Throws ConfigError on out-of-range values.
    void validate() const;
};

// Linear warm-up to `peak_lr` over floor(warmup_fraction * total_steps)
// steps, then linear decay to 0 at total_steps.
double lr_schedule(std::size_t step, std::size_t total_steps, double peak_lr, double warmup_fraction);

// Adam with decoupled weight decay. Decay applies to matrices only; bias
// vectors and layer-norm gains are exempt.
class AdamW {
public:
    AdamW(std::vector<nn::Parameter*> params, const TrainConfig& cfg);
    void step(double lr);
    std::size_t steps() const { return t_; }

private:
    std::vector<nn::Parameter*> params_;
    std::vector<nn::Matrix> m_, v_;
    double beta1_, beta2_, eps_, decay_;
    std::size_t t_ = 0;
};

// Global L2 norm over the gradients; rescales them when above max_norm.
// Returns the pre-clipping norm.
double clip_grad_norm(const std::vector<nn::Parameter*>& params, double max_norm);

struct Example {
    EncodedInput input;
    std::size_t target = 0;
};

// Task inputs per variant: standard, topic-prefixed, PET, or topic + PET.
std::vector<Example> build_examples(const LabeledDataset& ds, Variant v, const Tokenizer& t,
                                    const std::optional<PatternVerbalizerPair>& pvp,
                                    std::size_t max_length = kDefaultMaxLength);
std::vector<Example> build_stance_examples(const std::vector<StanceUnit>& units, const Tokenizer& t,
                                           std::size_t max_length = kDefaultMaxLength);

struct EpochLog {
    std::size_t epoch = 0;  // 1-based
    double loss = 0.0;      // mean classification cross-entropy
    double lr = 0.0;        // rate used by the epoch's last step
    double seconds = 0.0;
    std::optional<double> dev_macro_f1;
};

struct TrainLog {
    std::vector<EpochLog> epochs;
    std::vector<double> step_lrs;
    std::size_t total_steps = 0;
    std::size_t best_epoch = 0;  // 0 without selection
    nn::ParameterReport report;

    double total_seconds() const;
};

// epoch,loss,lr,seconds[,dev_macro_f1]
void write_train_log_csv(std::ostream& out, const TrainLog& log);

struct TrainData {
    const std::vector<Example>* train = nullptr;
    const std::vector<Example>* dev = nullptr;
    // Unlabeled token sequences for the pet_full language-model term.
    const std::vector<std::vector<TokenId>>* unlabeled = nullptr;
};

// Trains the trainable partition of `m` in place. With best_epoch_selection
// the parameters of the dev-best epoch are restored at the end. Throws
// InvariantError if any frozen tensor changed.
TrainLog train(nn::ModelAssembly& m, const TrainData& data, const TrainConfig& cfg);

// Selection by dev macro-F1: the first epoch attaining the maximum (1-based).
std::size_t select_best_epoch(const std::vector<double>& dev_macro_f1);

std::vector<std::size_t> predict_all(nn::ModelAssembly& m, const std::vector<Example>& examples);
MetricsTable evaluate(nn::ModelAssembly& m, const std::vector<Example>& examples);

// Builds the assembly for `v` on top of `backbone`: adapters as the variant
// needs, and a task head (standard, PET head, or the backbone's own LM head
// for pet_full). SAM variants get a 3-class pretraining head instead, to be
// replaced by continue_after_pretraining.
nn::ModelAssembly assemble(std::unique_ptr<nn::Backbone> backbone, Variant v,
                           const std::optional<PatternVerbalizerPair>& pvp, std::uint64_t seed,
                           std::size_t reduction_factor = 16);

// Near-domain stance training on 3-class data. The assembly must carry the
// 3-class pretraining head.
TrainLog pretrain_near_domain(nn::ModelAssembly& m, const std::vector<Example>& sam,
                              const TrainConfig& cfg);

// Swaps the pretraining head for the task head; for adapter variants the
// pretrained adapter is frozen under a fresh task adapter of the same width.
void continue_after_pretraining(nn::ModelAssembly& m, Variant v,
                                const std::optional<PatternVerbalizerPair>& pvp, std::uint64_t seed);

// Frozen tensors of `m` as a hash, for invariance checks.
std::uint64_t frozen_hash(nn::ModelAssembly& m);

}  // namespace argmine
