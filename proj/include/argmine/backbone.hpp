#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "argmine/autograd.hpp"

namespace argmine::nn {

// Called on each layer's feed-forward output before the residual add; the
// adapter stack plugs in here.
using LayerHook = std::function<Tape::Var(Tape&, std::size_t layer, Tape::Var ffn_out)>;

// Encoder interface: per-position hidden states plus masked-LM logits.
class Backbone {
public:
    virtual ~Backbone() = default;

    virtual std::size_t hidden_size() const = 0;
    virtual std::size_t layer_count() const = 0;
    virtual std::size_t vocab_size() const = 0;
    virtual std::size_t max_positions() const = 0;

    // length x hidden
    virtual Tape::Var encode(Tape& tape, const std::vector<TokenId>& ids, const LayerHook& hook) = 0;
    // rows of `hidden` -> rows x vocab
    virtual Tape::Var lm_logits(Tape& tape, Tape::Var hidden) = 0;

    virtual std::vector<Parameter*> parameters() = 0;
    std::vector<const Parameter*> parameters() const;

    void set_trainable(bool trainable);
};

struct EncoderConfig {
    std::size_t vocab_size = 0;
    std::size_t hidden = 32;
    std::size_t layers = 2;
    std::size_t heads = 2;
    std::size_t ffn = 64;
    std::size_t max_positions = 128;
    double init_std = 0.02;
    // Position table scale; 0 means init_std.
    double position_init_std = 0.0;
    double layer_norm_eps = 1e-5;
    std::uint64_t seed = 0;
};

// Post-LN transformer encoder with learned positions and a tied-embedding
// LM head, randomly initialized from the config seed. Stands in for a
// pretrained multilingual encoder at desk scale.
class MiniEncoder final : public Backbone {
public:
    explicit MiniEncoder(const EncoderConfig& cfg);

    std::size_t hidden_size() const override { return cfg_.hidden; }
    std::size_t layer_count() const override { return cfg_.layers; }
    std::size_t vocab_size() const override { return cfg_.vocab_size; }
    std::size_t max_positions() const override { return cfg_.max_positions; }
    const EncoderConfig& config() const { return cfg_; }

    Tape::Var encode(Tape& tape, const std::vector<TokenId>& ids, const LayerHook& hook) override;
    Tape::Var lm_logits(Tape& tape, Tape::Var hidden) override;
    std::vector<Parameter*> parameters() override;
    using Backbone::parameters;

private:
    struct Layer {
        Parameter q_w, q_b, k_w, k_b, v_w, v_b, o_w, o_b;
        Parameter attn_norm_g, attn_norm_b;
        Parameter ffn_in_w, ffn_in_b, ffn_out_w, ffn_out_b;
        Parameter ffn_norm_g, ffn_norm_b;
    };

    EncoderConfig cfg_;
    Parameter word_;
    Parameter position_;
    Parameter embed_norm_g_, embed_norm_b_;
    std::vector<Layer> layers_;
    Parameter lm_dense_w_, lm_dense_b_, lm_norm_g_, lm_norm_b_, lm_bias_;
};

}  // namespace argmine::nn
