#include "argmine/backbone.hpp"

#include <string>

#include "argmine/errors.hpp"
#include "argmine/rng.hpp"

namespace argmine::nn {

std::vector<const Parameter*> Backbone::parameters() const {
    auto params = const_cast<Backbone*>(this)->parameters();
    return {params.begin(), params.end()};
}

void Backbone::set_trainable(bool trainable) {
    for (auto* p : parameters()) p->trainable = trainable;
}

namespace {

Matrix ones_row(std::size_t n) { return Matrix::Ones(1, static_cast<Eigen::Index>(n)); }
Matrix zeros(std::size_t r, std::size_t c) {
    return Matrix::Zero(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

}  // namespace

MiniEncoder::MiniEncoder(const EncoderConfig& cfg) : cfg_(cfg) {
    if (cfg.vocab_size == 0 || cfg.hidden == 0 || cfg.layers == 0 || cfg.ffn == 0 ||
        cfg.max_positions == 0) {
        throw ConfigError("encoder dimensions must be positive");
    }
    if (cfg.heads == 0 || cfg.hidden % cfg.heads != 0) {
        throw ConfigError("encoder hidden size must be divisible by the head count");
    }
    const auto h = cfg.hidden;
    std::uint64_t draw = 0;
    auto normal = [&](std::size_t r, std::size_t c, double stddev) {
        return random_normal(r, c, stddev, derive_seed(cfg.seed, "encoder/" + std::to_string(draw++)));
    };
    const double s = cfg.init_std;
    word_ = Parameter("backbone.embeddings.word", normal(cfg.vocab_size, h, s));
    position_ = Parameter("backbone.embeddings.position",
                          normal(cfg.max_positions, h, cfg.position_init_std > 0.0 ? cfg.position_init_std : s));
    embed_norm_g_ = Parameter("backbone.embeddings.norm.gamma", ones_row(h));
    embed_norm_b_ = Parameter("backbone.embeddings.norm.beta", zeros(1, h));
    for (std::size_t i = 0; i < cfg.layers; ++i) {
        const std::string p = "backbone.layer." + std::to_string(i) + ".";
        Layer l;
        l.q_w = Parameter(p + "attention.query.weight", normal(h, h, s));
        l.q_b = Parameter(p + "attention.query.bias", zeros(1, h));
        l.k_w = Parameter(p + "attention.key.weight", normal(h, h, s));
        l.k_b = Parameter(p + "attention.key.bias", zeros(1, h));
        l.v_w = Parameter(p + "attention.value.weight", normal(h, h, s));
        l.v_b = Parameter(p + "attention.value.bias", zeros(1, h));
        l.o_w = Parameter(p + "attention.output.weight", normal(h, h, s));
        l.o_b = Parameter(p + "attention.output.bias", zeros(1, h));
        l.attn_norm_g = Parameter(p + "attention.norm.gamma", ones_row(h));
        l.attn_norm_b = Parameter(p + "attention.norm.beta", zeros(1, h));
        l.ffn_in_w = Parameter(p + "ffn.in.weight", normal(h, cfg.ffn, s));
        l.ffn_in_b = Parameter(p + "ffn.in.bias", zeros(1, cfg.ffn));
        l.ffn_out_w = Parameter(p + "ffn.out.weight", normal(cfg.ffn, h, s));
        l.ffn_out_b = Parameter(p + "ffn.out.bias", zeros(1, h));
        l.ffn_norm_g = Parameter(p + "ffn.norm.gamma", ones_row(h));
        l.ffn_norm_b = Parameter(p + "ffn.norm.beta", zeros(1, h));
        layers_.push_back(std::move(l));
    }
    lm_dense_w_ = Parameter("backbone.lm_head.dense.weight", normal(h, h, s));
    lm_dense_b_ = Parameter("backbone.lm_head.dense.bias", zeros(1, h));
    lm_norm_g_ = Parameter("backbone.lm_head.norm.gamma", ones_row(h));
    lm_norm_b_ = Parameter("backbone.lm_head.norm.beta", zeros(1, h));
    lm_bias_ = Parameter("backbone.lm_head.bias", zeros(1, cfg.vocab_size));
}

Tape::Var MiniEncoder::encode(Tape& t, const std::vector<TokenId>& ids, const LayerHook& hook) {
    if (ids.empty()) throw ShapeError("encode: empty input");
    if (ids.size() > cfg_.max_positions) {
        throw ShapeError("encode: input of " + std::to_string(ids.size()) + " tokens exceeds " +
                         std::to_string(cfg_.max_positions) + " positions");
    }
    const double eps = cfg_.layer_norm_eps;
    auto x = t.add(t.embedding(t.parameter(word_), ids),
                   t.leading_rows(t.parameter(position_), ids.size()));
    x = t.layer_norm(x, t.parameter(embed_norm_g_), t.parameter(embed_norm_b_), eps);

    for (std::size_t i = 0; i < layers_.size(); ++i) {
        Layer& l = layers_[i];
        auto q = t.linear(x, t.parameter(l.q_w), t.parameter(l.q_b));
        auto k = t.linear(x, t.parameter(l.k_w), t.parameter(l.k_b));
        auto v = t.linear(x, t.parameter(l.v_w), t.parameter(l.v_b));
        auto a = t.attention(q, k, v, cfg_.heads);
        a = t.linear(a, t.parameter(l.o_w), t.parameter(l.o_b));
        x = t.layer_norm(t.add(x, a), t.parameter(l.attn_norm_g), t.parameter(l.attn_norm_b), eps);

        auto f = t.gelu(t.linear(x, t.parameter(l.ffn_in_w), t.parameter(l.ffn_in_b)));
        f = t.linear(f, t.parameter(l.ffn_out_w), t.parameter(l.ffn_out_b));
        if (hook) f = hook(t, i, f);
        x = t.layer_norm(t.add(x, f), t.parameter(l.ffn_norm_g), t.parameter(l.ffn_norm_b), eps);
    }
    return x;
}

Tape::Var MiniEncoder::lm_logits(Tape& t, Tape::Var hidden) {
    auto h = t.gelu(t.linear(hidden, t.parameter(lm_dense_w_), t.parameter(lm_dense_b_)));
    h = t.layer_norm(h, t.parameter(lm_norm_g_), t.parameter(lm_norm_b_), cfg_.layer_norm_eps);
    auto logits = t.matmul_nt(h, t.parameter(word_));
    const auto rows = static_cast<std::size_t>(t.value(logits).rows());
    // broadcast the vocabulary bias over rows
    auto bias = t.rows(t.parameter(lm_bias_), std::vector<std::size_t>(rows, 0));
    return t.add(logits, bias);
}

std::vector<Parameter*> MiniEncoder::parameters() {
    std::vector<Parameter*> out = {&word_, &position_, &embed_norm_g_, &embed_norm_b_};
    for (auto& l : layers_) {
        for (Parameter* p : {&l.q_w, &l.q_b, &l.k_w, &l.k_b, &l.v_w, &l.v_b, &l.o_w, &l.o_b,
                             &l.attn_norm_g, &l.attn_norm_b, &l.ffn_in_w, &l.ffn_in_b, &l.ffn_out_w,
                             &l.ffn_out_b, &l.ffn_norm_g, &l.ffn_norm_b}) {
            out.push_back(p);
        }
    }
    for (Parameter* p : {&lm_dense_w_, &lm_dense_b_, &lm_norm_g_, &lm_norm_b_, &lm_bias_}) out.push_back(p);
    return out;
}

}  // namespace argmine::nn
