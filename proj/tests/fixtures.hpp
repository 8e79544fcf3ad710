#pragma once

// Shared builders for the miniature model used across test binaries.

#include <algorithm>
#include <cmath>
#include <memory>

#include "argmine/backbone.hpp"
#include "argmine/encoding.hpp"
#include "argmine/model.hpp"
#include "argmine/rng.hpp"
#include "argmine/synthetic.hpp"
#include "argmine/tokenizer.hpp"

namespace argmine::testing {

inline SubwordTokenizer toy_tokenizer() {
    std::vector<std::string> texts;
    for (const auto& w : synthetic_words()) texts.push_back(w);
    for (const auto& n : synthetic_person_names()) texts.push_back(n);
    texts.emplace_back(naive_pvp().pattern);
    texts.emplace_back(elaborate_pvp().pattern);
    texts.emplace_back("Waffenlieferung Ukraine");
    return SubwordTokenizer(build_vocabulary(texts, pattern_preset_pieces()));
}

inline nn::EncoderConfig mini_config(std::size_t vocab, std::uint64_t seed) {
    nn::EncoderConfig cfg;
    cfg.vocab_size = vocab;
    cfg.hidden = 32;
    cfg.layers = 2;
    cfg.heads = 2;
    cfg.ffn = 64;
    cfg.max_positions = 128;
    cfg.init_std = 0.2;
    cfg.position_init_std = 0.02;
    cfg.seed = seed;
    return cfg;
}

inline std::unique_ptr<nn::Backbone> mini_backbone(std::size_t vocab, std::uint64_t seed) {
    return std::make_unique<nn::MiniEncoder>(mini_config(vocab, seed));
}

inline SentenceUnit make_unit(std::string id, std::string text, Label label = Label::no_stance,
                              std::vector<std::string> before = {}, std::vector<std::string> after = {}) {
    SentenceUnit u;
    u.unit_id = std::move(id);
    u.doc_id = "d";
    u.text = std::move(text);
    u.context_before = std::move(before);
    u.context_after = std::move(after);
    u.label = label;
    return u;
}

inline double class_loss(nn::ModelAssembly& m, const EncodedInput& in, std::size_t target) {
    nn::Tape t;
    const auto loss = t.cross_entropy(m.class_logits(t, in), {target});
    return t.value(loss)(0, 0);
}

inline constexpr double kGradFloor = 1e-3;

struct GradCheck {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
};

// Central differences on `per_tensor` random coordinates of each tensor
// against the tape's gradient of the cross-entropy loss. The relative error
// is taken against max(|analytic|, |numeric|, 1e-3): near-zero coordinates
// are held to an absolute bound instead, since the O(step^2) truncation
// term does not shrink with the gradient.
inline GradCheck finite_difference_check(nn::ModelAssembly& m, const EncodedInput& in, std::size_t target,
                                         const std::vector<nn::Parameter*>& params, std::size_t per_tensor,
                                         std::uint64_t seed, double step = 1e-3) {
    m.zero_grad();
    {
        nn::Tape t;
        const auto loss = t.cross_entropy(m.class_logits(t, in), {target});
        t.backward(loss);
    }
    GradCheck out;
    Rng rng(seed);
    for (auto* p : params) {
        const nn::Matrix analytic = p->grad;
        const std::size_t n = std::min(per_tensor, p->size());
        for (std::size_t k = 0; k < n; ++k) {
            const auto flat = static_cast<Eigen::Index>(rng.below(p->size()));
            double& v = p->value.data()[flat];
            const double saved = v;
            v = saved + step;
            const double up = class_loss(m, in, target);
            v = saved - step;
            const double down = class_loss(m, in, target);
            v = saved;
            const double numeric = (up - down) / (2 * step);
            const double a = analytic.data()[flat];
            const double scale = std::max({std::abs(a), std::abs(numeric), kGradFloor});
            out.max_rel_error = std::max(out.max_rel_error, std::abs(a - numeric) / scale);
            ++out.checked;
        }
    }
    return out;
}

// Overwrites every listed tensor with fresh N(0, stddev) draws.
inline void randomize(const std::vector<nn::Parameter*>& params, double stddev, std::uint64_t seed) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto* p = params[i];
        p->value = nn::random_normal(static_cast<std::size_t>(p->value.rows()),
                                     static_cast<std::size_t>(p->value.cols()), stddev, mix_seed(seed, i));
    }
}

}  // namespace argmine::testing
