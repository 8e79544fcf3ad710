#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "argmine/backbone.hpp"
#include "argmine/encoding.hpp"

namespace argmine::nn {

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kAdapterInitStd = 0.02;
inline constexpr double kHeadInitStd = 0.02;

struct AdapterConfig {
    std::string name = "task";
    std::size_t reduction_factor = 16;
};

// One bottleneck per encoder layer, applied to the feed-forward output:
// h + up(gelu(down(h))). Up-projections start at zero so a fresh adapter is
// the identity.
class Adapter {
public:
    Adapter(const AdapterConfig& cfg, std::size_t hidden, std::size_t layers, std::uint64_t seed);

    const std::string& name() const { return name_; }
    std::size_t hidden() const { return hidden_; }
    std::size_t bottleneck() const { return bottleneck_; }
    std::size_t layer_count() const { return layers_.size(); }

    Tape::Var forward(Tape& tape, std::size_t layer, Tape::Var h);
    // Eval-mode convenience over a plain matrix; ShapeError on width mismatch.
    Matrix apply(std::size_t layer, const Matrix& h);

    void set_trainable(bool trainable);
    bool trainable() const;

    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;

private:
    struct Layer {
        Parameter down_w, down_b, up_w, up_b;
    };
    std::string name_;
    std::size_t hidden_ = 0;
    std::size_t bottleneck_ = 0;
    std::vector<Layer> layers_;
};

// Closed-form parameter counts.
std::size_t adapter_parameter_count(std::size_t hidden, std::size_t reduction_factor, std::size_t layers);
std::size_t pet_head_parameter_count(std::size_t hidden, std::size_t verbalizer_vocab);

// Affine map on the first-position hidden state.
class ClassificationHead {
public:
    ClassificationHead(std::string name, std::size_t hidden, std::size_t classes, std::uint64_t seed);

    std::size_t classes() const { return static_cast<std::size_t>(weight_.value.cols()); }
    Tape::Var forward(Tape& tape, Tape::Var hidden);

    std::vector<Parameter*> parameters() { return {&weight_, &bias_}; }

private:
    Parameter weight_, bias_;
};

// project (H -> H), GELU, layer norm, emit (H -> verbalizer vocabulary) at
// every mask position. The class logit sums, over the verbalizer's own
// tokens, the logit of token j at mask j; surplus masks are ignored.
class PetHead {
public:
    PetHead(std::string name, std::size_t hidden, std::size_t vocab, std::uint64_t seed);

    std::size_t vocab_size() const { return static_cast<std::size_t>(emit_w_.value.cols()); }

    // masks x vocab
    Tape::Var token_logits(Tape& tape, Tape::Var hidden, const std::vector<std::size_t>& mask_positions);
    // 1 x kLabelCount
    Tape::Var forward(Tape& tape, Tape::Var hidden, const std::vector<std::size_t>& mask_positions,
                      const PatternVerbalizerPair& pvp);

    std::vector<Parameter*> parameters() {
        return {&project_w_, &project_b_, &norm_g_, &norm_b_, &emit_w_, &emit_b_};
    }

private:
    Parameter project_w_, project_b_, norm_g_, norm_b_, emit_w_, emit_b_;
};

// (mask index, vocabulary column) picks per label for a PET-style sum.
std::vector<std::vector<std::pair<std::size_t, std::size_t>>> verbalizer_picks(
    const PatternVerbalizerPair& pvp, bool by_token_id);

// Class logits from per-mask verbalizer-vocabulary logits (masks x vocab).
Matrix sum_verbalizer_logits(const Matrix& per_mask_logits, const PatternVerbalizerPair& pvp);

enum class HeadKind { standard, pet, masked_lm };

std::string_view to_string(HeadKind k);

struct ParameterReport {
    std::size_t total = 0;
    std::size_t trainable = 0;
    std::map<std::string, std::size_t> by_component;
    std::size_t serialized_bytes_fp32 = 0;  // 4 x trainable
};

// Backbone plus ordered adapters (lowest first) plus exactly one head.
class ModelAssembly {
public:
    explicit ModelAssembly(std::unique_ptr<Backbone> backbone);

    ModelAssembly(ModelAssembly&&) noexcept = default;
    ModelAssembly& operator=(ModelAssembly&&) noexcept = default;

    Backbone& backbone() { return *backbone_; }
    const Backbone& backbone() const { return *backbone_; }
    std::unique_ptr<Backbone> release_backbone() { return std::move(backbone_); }

    // Attaching any adapter freezes the backbone.
    Adapter& add_adapter(const AdapterConfig& cfg, std::uint64_t seed);
    // Frozen `lower` under a fresh trainable adapter.
    Adapter& stack_adapters(Adapter lower, const AdapterConfig& upper, std::uint64_t seed);
    std::vector<Adapter>& adapters() { return adapters_; }
    const std::vector<Adapter>& adapters() const { return adapters_; }
    std::optional<Adapter> take_adapter(const std::string& name);

    void set_standard_head(std::size_t classes, std::uint64_t seed, std::string name = "head.standard");
    void set_pet_head(const PatternVerbalizerPair& pvp, std::uint64_t seed);
    // Scores verbalizer tokens with the backbone's own LM head.
    void set_masked_lm_head(const PatternVerbalizerPair& pvp);

    HeadKind head_kind() const { return head_kind_; }
    std::size_t class_count() const;
    const std::optional<PatternVerbalizerPair>& pvp() const { return pvp_; }

    // 1 x classes
    Tape::Var class_logits(Tape& tape, const EncodedInput& input);
    // Masked-LM cross-entropy at `positions` of `ids` against `targets`.
    Tape::Var masked_lm_loss(Tape& tape, const std::vector<TokenId>& ids,
                             const std::vector<std::size_t>& positions,
                             const std::vector<TokenId>& targets);

    std::vector<double> predict_logits(const EncodedInput& input);
    std::size_t predict(const EncodedInput& input);

    std::vector<Parameter*> parameters();
    std::vector<Parameter*> trainable_parameters();
    std::set<std::string> trainable_partition();
    // parameter name -> component (backbone, adapter.<name>, head.<name>)
    std::vector<std::pair<std::string, Parameter*>> components();

    void zero_grad();

private:
    Tape::Var encode(Tape& tape, const std::vector<TokenId>& ids);

    std::unique_ptr<Backbone> backbone_;
    std::vector<Adapter> adapters_;
    HeadKind head_kind_ = HeadKind::standard;
    std::optional<ClassificationHead> standard_;
    std::string standard_name_;
    std::optional<PetHead> pet_;
    std::optional<PatternVerbalizerPair> pvp_;
};

ParameterReport count_parameters(ModelAssembly& m);
// Counts over an explicit tensor list. Component: "backbone" for backbone
// tensors, otherwise the first two name segments (adapter.task, head.pet).
ParameterReport count_tensors(const std::vector<const Parameter*>& params);

// FNV-1a over names, shapes and raw values.
std::uint64_t parameter_hash(const std::vector<const Parameter*>& params);

}  // namespace argmine::nn
