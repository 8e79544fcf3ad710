#include "argmine/model.hpp"

#include <algorithm>
#include <cstring>

#include "argmine/errors.hpp"
#include "argmine/rng.hpp"

namespace argmine::nn {

namespace {

Matrix zeros(std::size_t r, std::size_t c) {
    return Matrix::Zero(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

std::string component_of(const std::string& name) {
    if (name.rfind("backbone.", 0) == 0) return "backbone";
    const auto first = name.find('.');
    if (first == std::string::npos) return name;
    const auto second = name.find('.', first + 1);
    return second == std::string::npos ? name : name.substr(0, second);
}

}  // namespace

std::string_view to_string(HeadKind k) {
    switch (k) {
        case HeadKind::standard: return "standard";
        case HeadKind::pet: return "pet";
        case HeadKind::masked_lm: return "masked_lm";
    }
    return "?";
}

// --- adapter -----------------------------------------------------------------

Adapter::Adapter(const AdapterConfig& cfg, std::size_t hidden, std::size_t layers, std::uint64_t seed)
    : name_(cfg.name), hidden_(hidden) {
    if (cfg.name.empty() || cfg.name.find('.') != std::string::npos) {
        throw ConfigError("adapter name must be non-empty and dot-free");
    }
    if (cfg.reduction_factor == 0 || hidden % cfg.reduction_factor != 0) {
        throw ConfigError("hidden size " + std::to_string(hidden) + " is not divisible by reduction factor " +
                          std::to_string(cfg.reduction_factor));
    }
    bottleneck_ = hidden / cfg.reduction_factor;
    for (std::size_t i = 0; i < layers; ++i) {
        const std::string p = "adapter." + name_ + ".layer." + std::to_string(i) + ".";
        Layer l;
        l.down_w = Parameter(p + "down.weight",
                             random_normal(hidden, bottleneck_, kAdapterInitStd,
                                           derive_seed(seed, p + "down")));
        l.down_b = Parameter(p + "down.bias", zeros(1, bottleneck_));
        l.up_w = Parameter(p + "up.weight", zeros(bottleneck_, hidden));
        l.up_b = Parameter(p + "up.bias", zeros(1, hidden));
        layers_.push_back(std::move(l));
    }
}

Tape::Var Adapter::forward(Tape& t, std::size_t layer, Tape::Var h) {
    if (layer >= layers_.size()) throw ShapeError("adapter '" + name_ + "': no layer " + std::to_string(layer));
    if (static_cast<std::size_t>(t.value(h).cols()) != hidden_) {
        throw ShapeError("adapter '" + name_ + "': input width " + std::to_string(t.value(h).cols()) +
                         " != hidden " + std::to_string(hidden_));
    }
    Layer& l = layers_[layer];
    auto z = t.gelu(t.linear(h, t.parameter(l.down_w), t.parameter(l.down_b)));
    z = t.linear(z, t.parameter(l.up_w), t.parameter(l.up_b));
    return t.add(h, z);
}

Matrix Adapter::apply(std::size_t layer, const Matrix& h) {
    Tape t;
    return t.value(forward(t, layer, t.constant(h)));
}

void Adapter::set_trainable(bool trainable) {
    for (auto* p : parameters()) p->trainable = trainable;
}

bool Adapter::trainable() const {
    return !layers_.empty() && layers_.front().down_w.trainable;
}

std::vector<Parameter*> Adapter::parameters() {
    std::vector<Parameter*> out;
    for (auto& l : layers_) {
        for (Parameter* p : {&l.down_w, &l.down_b, &l.up_w, &l.up_b}) out.push_back(p);
    }
    return out;
}

std::vector<const Parameter*> Adapter::parameters() const {
    auto params = const_cast<Adapter*>(this)->parameters();
    return {params.begin(), params.end()};
}

std::size_t adapter_parameter_count(std::size_t hidden, std::size_t reduction_factor, std::size_t layers) {
    const std::size_t b = hidden / reduction_factor;
    return layers * ((hidden * b + b) + (b * hidden + hidden));
}

std::size_t pet_head_parameter_count(std::size_t hidden, std::size_t verbalizer_vocab) {
    return (hidden * hidden + hidden) + 2 * hidden + (hidden * verbalizer_vocab + verbalizer_vocab);
}

// --- heads -------------------------------------------------------------------

ClassificationHead::ClassificationHead(std::string name, std::size_t hidden, std::size_t classes,
                                       std::uint64_t seed)
    : weight_(name + ".weight", random_normal(hidden, classes, kHeadInitStd, derive_seed(seed, name))),
      bias_(name + ".bias", zeros(1, classes)) {}

Tape::Var ClassificationHead::forward(Tape& t, Tape::Var hidden) {
    if (t.value(hidden).rows() == 0) throw ShapeError("classification head: empty hidden states");
    auto first = t.leading_rows(hidden, 1);
    return t.linear(first, t.parameter(weight_), t.parameter(bias_));
}

PetHead::PetHead(std::string name, std::size_t hidden, std::size_t vocab, std::uint64_t seed)
    : project_w_(name + ".project.weight",
                 random_normal(hidden, hidden, kHeadInitStd, derive_seed(seed, name + ".project"))),
      project_b_(name + ".project.bias", zeros(1, hidden)),
      norm_g_(name + ".norm.gamma", Matrix::Ones(1, static_cast<Eigen::Index>(hidden))),
      norm_b_(name + ".norm.beta", zeros(1, hidden)),
      emit_w_(name + ".emit.weight",
              random_normal(hidden, vocab, kHeadInitStd, derive_seed(seed, name + ".emit"))),
      emit_b_(name + ".emit.bias", zeros(1, vocab)) {}

Tape::Var PetHead::token_logits(Tape& t, Tape::Var hidden, const std::vector<std::size_t>& mask_positions) {
    auto h = t.rows(hidden, mask_positions);
    h = t.gelu(t.linear(h, t.parameter(project_w_), t.parameter(project_b_)));
    h = t.layer_norm(h, t.parameter(norm_g_), t.parameter(norm_b_), kLayerNormEps);
    return t.linear(h, t.parameter(emit_w_), t.parameter(emit_b_));
}

Tape::Var PetHead::forward(Tape& t, Tape::Var hidden, const std::vector<std::size_t>& mask_positions,
                           const PatternVerbalizerPair& pvp) {
    if (mask_positions.size() != pvp.mask_count()) {
        throw ShapeError("PET head: " + std::to_string(mask_positions.size()) + " mask positions, PVP '" +
                         pvp.name + "' needs " + std::to_string(pvp.mask_count()));
    }
    if (pvp.vocab_size() != vocab_size()) {
        throw ShapeError("PET head: output width " + std::to_string(vocab_size()) +
                         " != verbalizer vocabulary " + std::to_string(pvp.vocab_size()));
    }
    return t.gather_sum(token_logits(t, hidden, mask_positions), verbalizer_picks(pvp, false));
}

std::vector<std::vector<std::pair<std::size_t, std::size_t>>> verbalizer_picks(
    const PatternVerbalizerPair& pvp, bool by_token_id) {
    if (!pvp.validated) throw ConfigError("PVP '" + pvp.name + "' has not been verbalized");
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> picks(kLabelCount);
    for (Label l : kAllLabels) {
        const auto c = index_of(l);
        for (std::size_t j = 0; j < pvp.verbalizer_slots[c].size(); ++j) {
            const std::size_t col = by_token_id ? static_cast<std::size_t>(pvp.verbalizer_token_ids[c][j])
                                                : pvp.verbalizer_slots[c][j];
            picks[c].emplace_back(j, col);
        }
    }
    return picks;
}

Matrix sum_verbalizer_logits(const Matrix& per_mask_logits, const PatternVerbalizerPair& pvp) {
    Tape t;
    return t.value(t.gather_sum(t.constant(per_mask_logits), verbalizer_picks(pvp, false)));
}

// --- assembly ----------------------------------------------------------------

ModelAssembly::ModelAssembly(std::unique_ptr<Backbone> backbone) : backbone_(std::move(backbone)) {
    if (!backbone_) throw ConfigError("assembly needs a backbone");
}

Adapter& ModelAssembly::add_adapter(const AdapterConfig& cfg, std::uint64_t seed) {
    for (const auto& a : adapters_) {
        if (a.name() == cfg.name) throw ConfigError("adapter '" + cfg.name + "' already attached");
    }
    adapters_.emplace_back(cfg, backbone_->hidden_size(), backbone_->layer_count(), seed);
    backbone_->set_trainable(false);
    return adapters_.back();
}

Adapter& ModelAssembly::stack_adapters(Adapter lower, const AdapterConfig& upper, std::uint64_t seed) {
    if (lower.hidden() != backbone_->hidden_size() || lower.layer_count() != backbone_->layer_count()) {
        throw ShapeError("adapter '" + lower.name() + "' (hidden " + std::to_string(lower.hidden()) + ", " +
                         std::to_string(lower.layer_count()) + " layers) does not fit the backbone (hidden " +
                         std::to_string(backbone_->hidden_size()) + ", " +
                         std::to_string(backbone_->layer_count()) + " layers)");
    }
    if (lower.name() == upper.name) throw ConfigError("stacked adapters need distinct names");
    lower.set_trainable(false);
    adapters_.push_back(std::move(lower));
    return add_adapter(upper, seed);
}

std::optional<Adapter> ModelAssembly::take_adapter(const std::string& name) {
    auto it = std::find_if(adapters_.begin(), adapters_.end(), [&](const Adapter& a) { return a.name() == name; });
    if (it == adapters_.end()) return std::nullopt;
    Adapter a = std::move(*it);
    adapters_.erase(it);
    return a;
}

void ModelAssembly::set_standard_head(std::size_t classes, std::uint64_t seed, std::string name) {
    if (classes < 2) throw ConfigError("a classification head needs at least 2 classes");
    pet_.reset();
    pvp_.reset();
    standard_.emplace(name, backbone_->hidden_size(), classes, seed);
    standard_name_ = std::move(name);
    head_kind_ = HeadKind::standard;
}

void ModelAssembly::set_pet_head(const PatternVerbalizerPair& pvp, std::uint64_t seed) {
    if (!pvp.validated) throw ConfigError("PVP '" + pvp.name + "' has not been verbalized");
    standard_.reset();
    pet_.emplace("head.pet", backbone_->hidden_size(), pvp.vocab_size(), seed);
    pvp_ = pvp;
    head_kind_ = HeadKind::pet;
}

void ModelAssembly::set_masked_lm_head(const PatternVerbalizerPair& pvp) {
    if (!pvp.validated) throw ConfigError("PVP '" + pvp.name + "' has not been verbalized");
    for (auto id : pvp.verbalizer_vocab) {
        if (id < 0 || static_cast<std::size_t>(id) >= backbone_->vocab_size()) {
            throw ShapeError("verbalizer token id outside the backbone vocabulary");
        }
    }
    standard_.reset();
    pet_.reset();
    pvp_ = pvp;
    head_kind_ = HeadKind::masked_lm;
}

std::size_t ModelAssembly::class_count() const {
    if (head_kind_ == HeadKind::standard) {
        if (!standard_) throw ConfigError("assembly has no head");
        return standard_->classes();
    }
    return kLabelCount;
}

Tape::Var ModelAssembly::encode(Tape& t, const std::vector<TokenId>& ids) {
    if (adapters_.empty()) return backbone_->encode(t, ids, nullptr);
    LayerHook hook = [this](Tape& tape, std::size_t layer, Tape::Var f) {
        for (auto& a : adapters_) f = a.forward(tape, layer, f);
        return f;
    };
    return backbone_->encode(t, ids, hook);
}

Tape::Var ModelAssembly::class_logits(Tape& t, const EncodedInput& input) {
    switch (head_kind_) {
        case HeadKind::standard: {
            if (!standard_) throw ConfigError("assembly has no head");
            return standard_->forward(t, encode(t, input.ids));
        }
        case HeadKind::pet:
            return pet_->forward(t, encode(t, input.ids), input.mask_positions, *pvp_);
        case HeadKind::masked_lm: {
            if (input.mask_positions.size() != pvp_->mask_count()) {
                throw ShapeError("masked-LM head: mask count does not match the PVP");
            }
            auto hidden = encode(t, input.ids);
            auto logits = backbone_->lm_logits(t, t.rows(hidden, input.mask_positions));
            return t.gather_sum(logits, verbalizer_picks(*pvp_, true));
        }
    }
    throw ConfigError("unknown head kind");
}

Tape::Var ModelAssembly::masked_lm_loss(Tape& t, const std::vector<TokenId>& ids,
                                        const std::vector<std::size_t>& positions,
                                        const std::vector<TokenId>& targets) {
    if (positions.size() != targets.size() || positions.empty()) {
        throw ShapeError("masked_lm_loss: need one target per masked position");
    }
    auto hidden = encode(t, ids);
    auto logits = backbone_->lm_logits(t, t.rows(hidden, positions));
    std::vector<std::size_t> cols(targets.begin(), targets.end());
    return t.cross_entropy(logits, cols);
}

std::vector<double> ModelAssembly::predict_logits(const EncodedInput& input) {
    Tape t;
    const Matrix& z = t.value(class_logits(t, input));
    return {z.data(), z.data() + z.size()};
}

std::size_t ModelAssembly::predict(const EncodedInput& input) {
    const auto z = predict_logits(input);
    return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

std::vector<std::pair<std::string, Parameter*>> ModelAssembly::components() {
    std::vector<std::pair<std::string, Parameter*>> out;
    for (auto* p : backbone_->parameters()) out.emplace_back("backbone", p);
    for (auto& a : adapters_) {
        for (auto* p : a.parameters()) out.emplace_back("adapter." + a.name(), p);
    }
    if (standard_) {
        for (auto* p : standard_->parameters()) out.emplace_back(standard_name_, p);
    }
    if (pet_) {
        for (auto* p : pet_->parameters()) out.emplace_back("head.pet", p);
    }
    return out;
}

std::vector<Parameter*> ModelAssembly::parameters() {
    std::vector<Parameter*> out;
    for (auto& [c, p] : components()) out.push_back(p);
    return out;
}

std::vector<Parameter*> ModelAssembly::trainable_parameters() {
    std::vector<Parameter*> out;
    for (auto* p : parameters()) {
        if (p->trainable) out.push_back(p);
    }
    return out;
}

std::set<std::string> ModelAssembly::trainable_partition() {
    std::set<std::string> out;
    for (auto* p : trainable_parameters()) out.insert(p->name);
    return out;
}

void ModelAssembly::zero_grad() {
    for (auto* p : trainable_parameters()) p->zero_grad();
}

ParameterReport count_parameters(ModelAssembly& m) {
    ParameterReport r;
    for (auto& [component, p] : m.components()) {
        r.total += p->size();
        r.by_component[component] += p->size();
        if (p->trainable) r.trainable += p->size();
    }
    r.serialized_bytes_fp32 = 4 * r.trainable;
    return r;
}

ParameterReport count_tensors(const std::vector<const Parameter*>& params) {
    ParameterReport r;
    for (const auto* p : params) {
        r.total += p->size();
        r.by_component[component_of(p->name)] += p->size();
        if (p->trainable) r.trainable += p->size();
    }
    r.serialized_bytes_fp32 = 4 * r.trainable;
    return r;
}

std::uint64_t parameter_hash(const std::vector<const Parameter*>& params) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&](const void* data, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto* p : params) {
        feed(p->name.data(), p->name.size());
        const std::int64_t shape[2] = {p->value.rows(), p->value.cols()};
        feed(shape, sizeof shape);
        feed(p->value.data(), sizeof(double) * p->size());
    }
    return h;
}

}  // namespace argmine::nn
