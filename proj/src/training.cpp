#include "argmine/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

#include "argmine/errors.hpp"
#include "argmine/rng.hpp"
#include "argmine/text.hpp"

namespace argmine {

using nn::Matrix;
using nn::ModelAssembly;
using nn::Parameter;
using nn::Tape;

std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::ft: return "ft";
        case Variant::ft_sam: return "ft_sam";
        case Variant::adapter: return "adapter";
        case Variant::adapter_sam: return "adapter_sam";
        case Variant::pet_full: return "pet_full";
        case Variant::adapter_pet: return "adapter_pet";
        case Variant::adapter_sam_pet: return "adapter_sam_pet";
    }
    return "?";
}

std::optional<Variant> parse_variant(std::string_view s) {
    for (Variant v : kAllVariants) {
        if (to_string(v) == s) return v;
    }
    return std::nullopt;
}

bool uses_adapter(Variant v) {
    return v == Variant::adapter || v == Variant::adapter_sam || v == Variant::adapter_pet ||
           v == Variant::adapter_sam_pet;
}

bool uses_near_domain(Variant v) {
    return v == Variant::ft_sam || v == Variant::adapter_sam || v == Variant::adapter_sam_pet;
}

bool uses_pattern(Variant v) {
    return v == Variant::pet_full || v == Variant::adapter_pet || v == Variant::adapter_sam_pet;
}

TrainConfig TrainConfig::defaults(Variant v) {
    TrainConfig c;
    c.variant = v;
    switch (v) {
        case Variant::ft:
        case Variant::ft_sam:
            c.learning_rate = 5e-6;
            c.epochs = 30;
            break;
        case Variant::pet_full:
            c.learning_rate = 1e-5;
            c.epochs = 10;
            break;
        default:
            c.learning_rate = 5e-5;
            c.epochs = 30;
            break;
    }
    return c;
}

TrainConfig TrainConfig::pretraining(Variant v) {
    TrainConfig c = defaults(v);
    c.learning_rate = uses_adapter(v) ? 5e-5 : 5e-6;
    c.epochs = 2;
    return c;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be > 0");
    if (epochs == 0) throw ConfigError("epochs must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) throw ConfigError("warmup_fraction must be in [0, 1)");
    if (!(lm_loss_weight >= 0.0 && lm_loss_weight <= 1.0)) throw ConfigError("lm_loss_weight must be in [0, 1]");
    if (!(mlm_probability > 0.0 && mlm_probability < 1.0)) throw ConfigError("mlm_probability must be in (0, 1)");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
    if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be > 0");
}

double lr_schedule(std::size_t step, std::size_t total_steps, double peak_lr, double warmup_fraction) {
    if (total_steps == 0) throw ConfigError("lr_schedule: total_steps must be positive");
    if (step > total_steps) throw std::out_of_range("lr_schedule: step beyond total_steps");
    const auto warmup = static_cast<std::size_t>(std::floor(warmup_fraction * static_cast<double>(total_steps)));
    if (step < warmup) {
        return peak_lr * static_cast<double>(step) / static_cast<double>(warmup);
    }
    return peak_lr * static_cast<double>(total_steps - step) / static_cast<double>(total_steps - warmup);
}

AdamW::AdamW(std::vector<Parameter*> params, const TrainConfig& cfg)
    : params_(std::move(params)),
      beta1_(cfg.adam_beta1),
      beta2_(cfg.adam_beta2),
      eps_(cfg.adam_eps),
      decay_(cfg.weight_decay) {
    for (auto* p : params_) {
        m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
        v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
}

void AdamW::step(double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Parameter& p = *params_[i];
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
        const bool decays = p.value.rows() > 1 && p.value.cols() > 1;
        if (decays && decay_ > 0.0) p.value *= (1.0 - lr * decay_);
        p.value.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
        nn::round_to_fp32(p.value);
    }
}

double clip_grad_norm(const std::vector<Parameter*>& params, double max_norm) {
    double sq = 0.0;
    for (auto* p : params) sq += p->grad.squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const double s = max_norm / (norm + 1e-6);
        for (auto* p : params) p->grad *= s;
    }
    return norm;
}

std::vector<Example> build_examples(const LabeledDataset& ds, Variant v, const Tokenizer& t,
                                    const std::optional<PatternVerbalizerPair>& pvp, std::size_t max_length) {
    if (uses_pattern(v) && (!pvp || !pvp->validated)) {
        throw ConfigError("variant " + std::string(to_string(v)) + " needs a verbalized PVP");
    }
    const std::string topic(kTaskTopic);
    std::vector<Example> out;
    out.reserve(ds.units.size());
    for (const auto& u : ds.units) {
        Example e;
        e.target = index_of(u.label);
        switch (v) {
            case Variant::ft:
            case Variant::adapter: e.input = build_standard_input(u, t, max_length); break;
            case Variant::ft_sam:
            case Variant::adapter_sam: e.input = build_topic_input(topic, u, t, max_length); break;
            case Variant::pet_full:
            case Variant::adapter_pet: e.input = build_pet_input(u, *pvp, t, max_length); break;
            case Variant::adapter_sam_pet: e.input = build_pet_input(u, *pvp, t, max_length, topic); break;
        }
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<Example> build_stance_examples(const std::vector<StanceUnit>& units, const Tokenizer& t,
                                           std::size_t max_length) {
    std::vector<Example> out;
    out.reserve(units.size());
    for (const auto& u : units) {
        out.push_back({build_stance_input(u, t, max_length), static_cast<std::size_t>(u.stance)});
    }
    return out;
}

double TrainLog::total_seconds() const {
    double s = 0.0;
    for (const auto& e : epochs) s += e.seconds;
    return s;
}

void write_train_log_csv(std::ostream& out, const TrainLog& log) {
    const bool dev = std::any_of(log.epochs.begin(), log.epochs.end(),
                                 [](const EpochLog& e) { return e.dev_macro_f1.has_value(); });
    out << "epoch,loss,lr,seconds" << (dev ? ",dev_macro_f1" : "") << '\n';
    for (const auto& e : log.epochs) {
        out << e.epoch << ',' << format_double(e.loss) << ',' << format_double(e.lr) << ','
            << format_fixed(e.seconds, 6);
        if (dev) out << ',' << (e.dev_macro_f1 ? format_double(*e.dev_macro_f1) : "");
        out << '\n';
    }
}

std::size_t select_best_epoch(const std::vector<double>& dev_macro_f1) {
    if (dev_macro_f1.empty()) throw std::invalid_argument("select_best_epoch: empty trace");
    return static_cast<std::size_t>(std::max_element(dev_macro_f1.begin(), dev_macro_f1.end()) -
                                    dev_macro_f1.begin()) +
           1;
}

std::vector<std::size_t> predict_all(ModelAssembly& m, const std::vector<Example>& examples) {
    std::vector<std::size_t> out;
    out.reserve(examples.size());
    for (const auto& e : examples) out.push_back(m.predict(e.input));
    return out;
}

MetricsTable evaluate(ModelAssembly& m, const std::vector<Example>& examples) {
    std::vector<std::size_t> gold;
    gold.reserve(examples.size());
    for (const auto& e : examples) gold.push_back(e.target);
    return metrics(confusion(gold, predict_all(m, examples), m.class_count()));
}

std::uint64_t frozen_hash(ModelAssembly& m) {
    std::vector<const Parameter*> frozen;
    for (auto* p : m.parameters()) {
        if (!p->trainable) frozen.push_back(p);
    }
    return nn::parameter_hash(frozen);
}

namespace {

// Masks a random mlm_probability share of the non-special positions (at
// least one) with <mask>.
struct MaskedSequence {
    std::vector<TokenId> ids;
    std::vector<std::size_t> positions;
    std::vector<TokenId> targets;
};

std::optional<MaskedSequence> mask_sequence(const std::vector<TokenId>& ids, const SpecialIds& sp,
                                            double probability, Rng& rng) {
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const TokenId id = ids[i];
        if (id != sp.begin && id != sp.pad && id != sp.separator && id != sp.mask) candidates.push_back(i);
    }
    if (candidates.empty()) return std::nullopt;
    const auto k = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(probability * static_cast<double>(candidates.size()))));
    MaskedSequence s;
    s.ids = ids;
    for (std::size_t pick : rng.choose(candidates.size(), k)) {
        const std::size_t pos = candidates[pick];
        s.positions.push_back(pos);
        s.targets.push_back(ids[pos]);
        s.ids[pos] = sp.mask;
    }
    return s;
}

}  // namespace

TrainLog train(ModelAssembly& m, const TrainData& data, const TrainConfig& cfg) {
    cfg.validate();
    if (data.train == nullptr || data.train->empty()) throw ConfigError("train: empty training set");
    if (cfg.best_epoch_selection && (data.dev == nullptr || data.dev->empty())) {
        throw ConfigError("train: best-epoch selection needs a dev set");
    }
    const auto& examples = *data.train;
    const std::size_t classes = m.class_count();
    for (const auto& e : examples) {
        if (e.target >= classes) {
            throw ConfigError("train: target class " + std::to_string(e.target) + " but the head has " +
                              std::to_string(classes) + " classes");
        }
    }
    const bool with_lm = m.head_kind() == nn::HeadKind::masked_lm && cfg.lm_loss_weight > 0.0 &&
                         data.unlabeled != nullptr && !data.unlabeled->empty();

    const std::uint64_t frozen_before = frozen_hash(m);
    auto params = m.trainable_parameters();
    if (params.empty()) throw ConfigError("train: the assembly has no trainable parameters");
    AdamW optimizer(params, cfg);

    const std::size_t n = examples.size();
    const std::size_t batches = (n + cfg.batch_size - 1) / cfg.batch_size;
    TrainLog log;
    log.total_steps = batches * cfg.epochs;
    log.step_lrs.reserve(log.total_steps);

    Rng lm_rng(derive_seed(cfg.seed, "train/mlm"));
    const SpecialIds specials{};
    std::vector<Matrix> best;
    double best_f1 = -1.0;
    std::size_t step = 0;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        Rng(derive_seed(cfg.seed, "train/epoch/" + std::to_string(epoch))).shuffle(order);

        double loss_sum = 0.0;
        for (std::size_t b = 0; b < batches; ++b) {
            const std::size_t lo = b * cfg.batch_size;
            const std::size_t hi = std::min(n, lo + cfg.batch_size);
            const double inv = 1.0 / static_cast<double>(hi - lo);
            m.zero_grad();
            for (std::size_t i = lo; i < hi; ++i) {
                const Example& ex = examples[order[i]];
                Tape tape;
                auto ce = tape.cross_entropy(m.class_logits(tape, ex.input), {ex.target});
                loss_sum += tape.value(ce)(0, 0);
                auto loss = ce;
                if (with_lm) {
                    const auto& seq = (*data.unlabeled)[lm_rng.below(data.unlabeled->size())];
                    if (auto masked = mask_sequence(seq, specials, cfg.mlm_probability, lm_rng)) {
                        auto lm = m.masked_lm_loss(tape, masked->ids, masked->positions, masked->targets);
                        loss = tape.add(tape.scale(ce, 1.0 - cfg.lm_loss_weight), tape.scale(lm, cfg.lm_loss_weight));
                    }
                }
                tape.backward(tape.scale(loss, inv));
            }
            clip_grad_norm(params, cfg.clip_norm);
            const double lr = lr_schedule(step, log.total_steps, cfg.learning_rate, cfg.warmup_fraction);
            optimizer.step(lr);
            log.step_lrs.push_back(lr);
            ++step;
        }

        EpochLog e;
        e.epoch = epoch;
        e.loss = loss_sum / static_cast<double>(n);
        e.lr = log.step_lrs.back();
        if (cfg.best_epoch_selection) {
            const double f1 = evaluate(m, *data.dev).macro_f1;
            e.dev_macro_f1 = f1;
            if (f1 > best_f1) {
                best_f1 = f1;
                log.best_epoch = epoch;
                best.clear();
                for (auto* p : params) best.push_back(p->value);
            }
        }
        e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        log.epochs.push_back(e);
    }

    if (cfg.best_epoch_selection) {
        for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best[i];
    }
    if (frozen_hash(m) != frozen_before) {
        throw InvariantError("a frozen parameter changed during training");
    }
    log.report = nn::count_parameters(m);
    return log;
}

nn::ModelAssembly assemble(std::unique_ptr<nn::Backbone> backbone, Variant v,
                           const std::optional<PatternVerbalizerPair>& pvp, std::uint64_t seed,
                           std::size_t reduction_factor) {
    if (uses_pattern(v) && (!pvp || !pvp->validated)) {
        throw ConfigError("variant " + std::string(to_string(v)) + " needs a verbalized PVP");
    }
    ModelAssembly m(std::move(backbone));
    if (uses_near_domain(v)) {
        if (uses_adapter(v)) m.add_adapter({"sam", reduction_factor}, derive_seed(seed, "adapter/sam"));
        m.set_standard_head(kStanceCount, derive_seed(seed, "head/pretrain"), "head.pretrain");
        return m;
    }
    if (uses_adapter(v)) m.add_adapter({"task", reduction_factor}, derive_seed(seed, "adapter/task"));
    switch (v) {
        case Variant::pet_full: m.set_masked_lm_head(*pvp); break;
        case Variant::adapter_pet: m.set_pet_head(*pvp, derive_seed(seed, "head/pet")); break;
        default: m.set_standard_head(kLabelCount, derive_seed(seed, "head/standard")); break;
    }
    return m;
}

TrainLog pretrain_near_domain(ModelAssembly& m, const std::vector<Example>& sam, const TrainConfig& cfg) {
    if (m.head_kind() != nn::HeadKind::standard || m.class_count() != kStanceCount) {
        throw ConfigError("near-domain pretraining needs a " + std::to_string(kStanceCount) + "-class head");
    }
    for (const auto& e : sam) {
        if (e.target >= kStanceCount) throw ConfigError("near-domain data must have 3 classes");
    }
    TrainConfig c = cfg;
    c.best_epoch_selection = false;
    return train(m, TrainData{&sam, nullptr, nullptr}, c);
}

void continue_after_pretraining(ModelAssembly& m, Variant v, const std::optional<PatternVerbalizerPair>& pvp,
                                std::uint64_t seed) {
    if (!uses_near_domain(v)) throw ConfigError(std::string(to_string(v)) + " has no pretraining stage");
    if (uses_adapter(v)) {
        auto sam = m.take_adapter("sam");
        if (!sam) throw ConfigError("no pretrained 'sam' adapter on the assembly");
        const std::size_t reduction_factor = m.backbone().hidden_size() / sam->bottleneck();
        m.stack_adapters(std::move(*sam), {"task", reduction_factor}, derive_seed(seed, "adapter/task"));
    }
    if (v == Variant::adapter_sam_pet) {
        if (!pvp || !pvp->validated) throw ConfigError("adapter_sam_pet needs a verbalized PVP");
        m.set_pet_head(*pvp, derive_seed(seed, "head/pet"));
    } else {
        m.set_standard_head(kLabelCount, derive_seed(seed, "head/standard"));
    }
}

}  // namespace argmine
