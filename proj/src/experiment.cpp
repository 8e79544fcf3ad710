#include "argmine/experiment.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <tuple>

#include "argmine/backbone.hpp"
#include "argmine/checkpoint.hpp"
#include "argmine/errors.hpp"
#include "argmine/rng.hpp"
#include "argmine/text.hpp"
#include "json.hpp"

namespace argmine {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string_view to_string(PersonsCondition c) { return c == PersonsCondition::original ? "original" : "shuffled"; }
std::string_view to_string(LabelsCondition c) { return c == LabelsCondition::original ? "original" : "onion"; }

// --- configuration -----------------------------------------------------------

std::map<std::string, std::string> parse_key_values(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        }
        std::string key = trim(std::string_view(t).substr(0, eq));
        std::string value = trim(std::string_view(t).substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        if (!kv.emplace(key, value).second) {
            throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        }
    }
    return kv;
}

std::map<std::string, std::string> load_key_values(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    try {
        return parse_key_values(in);
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

namespace {

double to_real(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc{} || ptr != end) throw ConfigError(key + ": '" + v + "' is not a number");
    return out;
}

std::uint64_t to_unsigned(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc{} || ptr != end) throw ConfigError(key + ": '" + v + "' is not a non-negative integer");
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key + ": '" + v + "' is not a boolean");
}

std::string join_reals(const std::vector<double>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + format_double(xs[i]);
    return out;
}

std::string join_unsigned(const std::vector<std::uint64_t>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + std::to_string(xs[i]);
    return out;
}

void apply_train_key(TrainConfig& c, const std::string& key, const std::string& v) {
    if (key == "learning_rate") c.learning_rate = to_real(key, v);
    else if (key == "epochs") c.epochs = to_unsigned(key, v);
    else if (key == "batch_size") c.batch_size = to_unsigned(key, v);
    else if (key == "warmup_fraction") c.warmup_fraction = to_real(key, v);
    else if (key == "best_epoch_selection") c.best_epoch_selection = to_bool(key, v);
    else if (key == "lm_loss_weight") c.lm_loss_weight = to_real(key, v);
    else if (key == "mlm_probability") c.mlm_probability = to_real(key, v);
    else if (key == "weight_decay") c.weight_decay = to_real(key, v);
    else if (key == "clip_norm") c.clip_norm = to_real(key, v);
    else throw ConfigError("unknown key '" + key + "'");
}

void put_train_keys(std::map<std::string, std::string>& kv, const std::string& prefix, const TrainConfig& c) {
    kv[prefix + "learning_rate"] = format_double(c.learning_rate);
    kv[prefix + "epochs"] = std::to_string(c.epochs);
    kv[prefix + "batch_size"] = std::to_string(c.batch_size);
    kv[prefix + "warmup_fraction"] = format_double(c.warmup_fraction);
    kv[prefix + "best_epoch_selection"] = c.best_epoch_selection ? "true" : "false";
    kv[prefix + "lm_loss_weight"] = format_double(c.lm_loss_weight);
    kv[prefix + "mlm_probability"] = format_double(c.mlm_probability);
    kv[prefix + "weight_decay"] = format_double(c.weight_decay);
    kv[prefix + "clip_norm"] = format_double(c.clip_norm);
}

}  // namespace

ExperimentSpec spec_from_key_values(const std::map<std::string, std::string>& kv) {
    ExperimentSpec s;
    if (auto it = kv.find("variant"); it != kv.end()) {
        auto v = parse_variant(it->second);
        if (!v) throw ConfigError("variant: unknown '" + it->second + "'");
        s.variant = *v;
    }
    s.train = TrainConfig::defaults(s.variant);
    s.pretrain = TrainConfig::pretraining(s.variant);

    for (const auto& [key, v] : kv) {
        if (key == "variant") continue;
        if (key == "dataset") s.dataset = v;
        else if (key == "persons_file") s.persons_file = v;
        else if (key == "near_domain") s.near_domain = v;
        else if (key == "vocab_file") s.vocab_file = v;
        else if (key == "out") s.out = v;
        else if (key == "persons") {
            if (v == "original") s.persons = PersonsCondition::original;
            else if (v == "shuffled") s.persons = PersonsCondition::shuffled;
            else throw ConfigError("persons: expected original or shuffled, got '" + v + "'");
        } else if (key == "labels") {
            if (v == "original") s.labels = LabelsCondition::original;
            else if (v == "onion") s.labels = LabelsCondition::onion;
            else throw ConfigError("labels: expected original or onion, got '" + v + "'");
        } else if (key == "pvp") {
            pvp_preset(v);  // validates the name
            s.pvp = v;
        } else if (key == "proportions") {
            s.proportions.clear();
            for (const auto& p : split(v, ',')) s.proportions.push_back(to_real(key, trim(p)));
        } else if (key == "mode") {
            auto m = parse_sample_mode(v);
            if (!m) throw ConfigError("mode: expected stratified or tfs, got '" + v + "'");
            s.mode = *m;
        } else if (key == "seeds") {
            s.seeds.clear();
            for (const auto& p : split(v, ',')) s.seeds.push_back(to_unsigned(key, trim(p)));
        } else if (key == "seed") s.seed = to_unsigned(key, v);
        else if (key == "no_stance_share") {
            if (v == "none" || v.empty()) s.no_stance_share.reset();
            else s.no_stance_share = to_real(key, v);
        } else if (key == "split.train") s.split.train = to_real(key, v);
        else if (key == "split.dev") s.split.dev = to_real(key, v);
        else if (key == "split.test") s.split.test = to_real(key, v);
        else if (key == "hidden") s.hidden = to_unsigned(key, v);
        else if (key == "layers") s.layers = to_unsigned(key, v);
        else if (key == "heads") s.heads = to_unsigned(key, v);
        else if (key == "ffn") s.ffn = to_unsigned(key, v);
        else if (key == "max_length") s.max_length = to_unsigned(key, v);
        else if (key == "reduction_factor") s.reduction_factor = to_unsigned(key, v);
        else if (key == "init_std") s.init_std = to_real(key, v);
        else if (key == "position_init_std") s.position_init_std = to_real(key, v);
        else if (key == "jobs") s.jobs = to_unsigned(key, v);
        else if (key.starts_with("pretrain.")) apply_train_key(s.pretrain, key.substr(9), v);
        else apply_train_key(s.train, key, v);
    }

    if (s.proportions.empty()) throw ConfigError("proportions: empty list");
    for (double p : s.proportions) {
        if (!(p > 0.0 && p <= 1.0)) throw ConfigError("proportions: " + format_double(p) + " is outside (0, 1]");
    }
    if (s.seeds.empty()) throw ConfigError("seeds: empty list");
    if (std::set<std::uint64_t>(s.seeds.begin(), s.seeds.end()).size() != s.seeds.size()) {
        throw ConfigError("seeds: duplicates");
    }
    if (s.jobs == 0) throw ConfigError("jobs must be positive");
    if (!(s.init_std > 0.0)) throw ConfigError("init_std must be > 0");
    if (s.position_init_std < 0.0) throw ConfigError("position_init_std must be >= 0");
    if (s.hidden == 0 || s.heads == 0 || s.hidden % s.heads != 0) throw ConfigError("hidden must be a multiple of heads");
    if (s.reduction_factor == 0 || s.hidden % s.reduction_factor != 0) {
        throw ConfigError("reduction_factor must divide hidden");
    }
    s.train.variant = s.variant;
    s.pretrain.variant = s.variant;
    s.train.validate();
    s.pretrain.validate();
    return s;
}

std::map<std::string, std::string> spec_to_key_values(const ExperimentSpec& s) {
    std::map<std::string, std::string> kv;
    kv["dataset"] = s.dataset.string();
    if (!s.persons_file.empty()) kv["persons_file"] = s.persons_file.string();
    if (!s.near_domain.empty()) kv["near_domain"] = s.near_domain.string();
    if (!s.vocab_file.empty()) kv["vocab_file"] = s.vocab_file.string();
    kv["out"] = s.out.string();
    kv["persons"] = std::string(to_string(s.persons));
    kv["labels"] = std::string(to_string(s.labels));
    kv["variant"] = std::string(to_string(s.variant));
    kv["pvp"] = s.pvp;
    kv["proportions"] = join_reals(s.proportions);
    kv["mode"] = std::string(to_string(s.mode));
    kv["seeds"] = join_unsigned(s.seeds);
    kv["seed"] = std::to_string(s.seed);
    kv["no_stance_share"] = s.no_stance_share ? format_double(*s.no_stance_share) : "none";
    kv["split.train"] = format_double(s.split.train);
    kv["split.dev"] = format_double(s.split.dev);
    kv["split.test"] = format_double(s.split.test);
    kv["hidden"] = std::to_string(s.hidden);
    kv["layers"] = std::to_string(s.layers);
    kv["heads"] = std::to_string(s.heads);
    kv["ffn"] = std::to_string(s.ffn);
    kv["max_length"] = std::to_string(s.max_length);
    kv["reduction_factor"] = std::to_string(s.reduction_factor);
    kv["init_std"] = format_double(s.init_std);
    kv["position_init_std"] = format_double(s.position_init_std);
    kv["jobs"] = std::to_string(s.jobs);
    put_train_keys(kv, "", s.train);
    put_train_keys(kv, "pretrain.", s.pretrain);
    return kv;
}

void write_key_values(std::ostream& out, const std::map<std::string, std::string>& kv) {
    for (const auto& [k, v] : kv) out << k << " = " << v << '\n';
}

// --- prepare -----------------------------------------------------------------

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw LoadError("failed writing '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json counts_json(const LabelCounts& c) {
    json j = json::object();
    for (Label l : kAllLabels) j[std::string(to_string(l))] = c[index_of(l)];
    return j;
}

// Pattern and topic words the PET and SAM inputs need.
std::vector<std::string> input_scaffold_texts() {
    std::vector<std::string> out;
    for (const auto& pvp : {naive_pvp(), elaborate_pvp()}) {
        std::string text = pvp.pattern;
        for (std::string_view marker : {PatternVerbalizerPair::kMaskMarker, PatternVerbalizerPair::kInputSlot}) {
            for (auto pos = text.find(marker); pos != std::string::npos; pos = text.find(marker)) {
                text.replace(pos, marker.size(), " ");
            }
        }
        out.push_back(text);
    }
    out.emplace_back(kTaskTopic);
    return out;
}

}  // namespace

PrepareSummary cmd_prepare(const ExperimentSpec& spec) {
    if (spec.dataset.empty()) throw ConfigError("dataset path is not set");
    LabeledDataset ds = load_dataset(spec.dataset);
    validate_dataset(ds);
    PrepareSummary summary;
    summary.before = count_labels(ds);

    if (spec.no_stance_share) {
        auto r = downsample_no_stance(ds, *spec.no_stance_share, derive_seed(spec.seed, "prepare/downsample"));
        ds = std::move(r.dataset);
        summary.downsample_target = r.target;
        summary.downsample_shortfall = r.shortfall;
    }
    // Split on the original labels so every condition shares one split.
    const bool presplit = !ds.units.empty() && ds.units.front().split.has_value();
    if (!presplit) ds = split_dataset(ds, spec.split, derive_seed(spec.seed, "prepare/split"));

    if (spec.persons == PersonsCondition::shuffled) {
        if (spec.persons_file.empty()) throw ConfigError("persons=shuffled needs persons_file");
        const auto recognizer = DictionaryRecognizer::from_file(spec.persons_file);
        auto r = shuffle_persons(ds, recognizer, derive_seed(spec.seed, "prepare/persons"));
        ds = std::move(r.dataset);
        summary.replaced_spans = r.replaced_spans;
    }
    if (spec.labels == LabelsCondition::onion) {
        for (const auto& u : ds.units) {
            if (u.onion && is_stance(u.label)) ++summary.onion_flips[index_of(u.label)];
        }
        ds = swap_onion(ds);
    }
    summary.after = count_labels(ds);

    const fs::path dir = spec.prepared_dir();
    fs::create_directories(dir);
    for (Split s : {Split::train, Split::dev, Split::test}) {
        save_dataset(dir / (std::string(to_string(s)) + ".jsonl"), units_in_split(ds, s));
    }

    std::vector<std::string> pieces;
    if (!spec.vocab_file.empty()) {
        pieces = SubwordTokenizer::load(spec.vocab_file).vocabulary();
    } else {
        std::vector<std::string> texts = input_scaffold_texts();
        for (const auto& u : ds.units) {
            texts.push_back(u.text);
            texts.insert(texts.end(), u.context_before.begin(), u.context_before.end());
            texts.insert(texts.end(), u.context_after.begin(), u.context_after.end());
        }
        if (!spec.near_domain.empty()) {
            for (const auto& u : load_stance_tsv(spec.near_domain)) {
                texts.push_back(u.topic);
                texts.push_back(u.text);
            }
        }
        pieces = build_vocabulary(texts, pattern_preset_pieces());
    }
    SubwordTokenizer(pieces).save(dir / "vocab.txt");

    json manifest;
    manifest["spec"] = spec_to_key_values(spec);
    manifest["seeds"] = {{"downsample", derive_seed(spec.seed, "prepare/downsample")},
                         {"split", derive_seed(spec.seed, "prepare/split")},
                         {"persons", derive_seed(spec.seed, "prepare/persons")}};
    manifest["conditions"] = {{"persons", std::string(to_string(spec.persons))},
                              {"labels", std::string(to_string(spec.labels))},
                              {"presplit", presplit}};
    manifest["counts_before"] = counts_json(summary.before);
    manifest["counts_after"] = counts_json(summary.after);
    if (spec.no_stance_share) {
        manifest["downsample"] = {{"share", *spec.no_stance_share},
                                  {"target", summary.downsample_target},
                                  {"shortfall", summary.downsample_shortfall}};
    }
    manifest["replaced_person_spans"] = summary.replaced_spans;
    manifest["onion_flips"] = counts_json(summary.onion_flips);
    json splits = json::object();
    for (Split s : {Split::train, Split::dev, Split::test}) {
        splits[std::string(to_string(s))] = counts_json(count_labels(units_in_split(ds, s)));
    }
    manifest["splits"] = splits;
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");

    std::ostringstream conf;
    write_key_values(conf, spec_to_key_values(spec));
    write_text(spec.out / "experiment.conf", conf.str());
    return summary;
}

// --- cells -------------------------------------------------------------------

std::vector<Cell> sweep_cells(const ExperimentSpec& spec) {
    std::vector<Cell> cells;
    for (double p : spec.proportions) {
        for (auto seed : spec.seeds) cells.push_back({p, seed});
    }
    return cells;
}

fs::path cell_dir(const ExperimentSpec& spec, const Cell& c) {
    return spec.runs_dir() / std::string(to_string(spec.variant)) / ("p" + format_double(c.proportion)) /
           ("seed" + std::to_string(c.seed));
}

namespace {

constexpr const char* kDoneMarker = "complete";

struct CellContext {
    LabeledDataset train, dev, test, all;
    std::unique_ptr<SubwordTokenizer> tokenizer;
    std::optional<PatternVerbalizerPair> pvp;
};

CellContext load_context(const ExperimentSpec& spec) {
    const fs::path dir = spec.prepared_dir();
    if (!fs::exists(dir / "manifest.json")) {
        throw ConfigError("no prepared data under '" + dir.string() + "'; run prepare first");
    }
    CellContext ctx;
    ctx.train = load_dataset(dir / "train.jsonl");
    ctx.dev = load_dataset(dir / "dev.jsonl");
    ctx.test = load_dataset(dir / "test.jsonl");
    for (const auto* part : {&ctx.train, &ctx.dev, &ctx.test}) {
        ctx.all.units.insert(ctx.all.units.end(), part->units.begin(), part->units.end());
    }
    ctx.tokenizer = std::make_unique<SubwordTokenizer>(SubwordTokenizer::load(dir / "vocab.txt"));
    if (uses_pattern(spec.variant)) ctx.pvp = verbalize(pvp_preset(spec.pvp), *ctx.tokenizer);
    return ctx;
}

std::unique_ptr<nn::Backbone> make_backbone(const ExperimentSpec& spec, std::size_t vocab) {
    nn::EncoderConfig cfg;
    cfg.vocab_size = vocab;
    cfg.hidden = spec.hidden;
    cfg.layers = spec.layers;
    cfg.heads = spec.heads;
    cfg.ffn = spec.ffn;
    cfg.max_positions = spec.max_length;
    cfg.init_std = spec.init_std;
    cfg.position_init_std = spec.position_init_std;
    cfg.seed = derive_seed(spec.seed, "backbone");
    return std::make_unique<nn::MiniEncoder>(cfg);
}

std::vector<StanceUnit> near_domain_units(const ExperimentSpec& spec) {
    if (spec.near_domain.empty()) {
        throw ConfigError("variant " + std::string(to_string(spec.variant)) + " needs near_domain data");
    }
    auto units = load_stance_tsv(spec.near_domain);
    std::vector<StanceUnit> train;
    for (auto& u : units) {
        if (!u.split || *u.split == Split::train) train.push_back(std::move(u));
    }
    if (train.empty()) throw ConfigError("near_domain data has no training units");
    return train;
}

// Mirrors the assembly a cell trains, without training it.
nn::ModelAssembly build_cell_assembly(const ExperimentSpec& spec, const Cell& c, const CellContext& ctx) {
    return assemble(make_backbone(spec, ctx.tokenizer->vocab_size()), spec.variant, ctx.pvp,
                    derive_seed(c.seed, "cell/init"), spec.reduction_factor);
}

LabeledDataset sample_for(const ExperimentSpec& spec, const Cell& c, const LabeledDataset& train) {
    if (c.proportion >= 1.0) return train;
    if (spec.mode == SampleMode::stratified) {
        // One fixed subset per proportion; repetitions vary training only.
        return sample_stratified(train, c.proportion,
                                 derive_seed(spec.seed, "sample/stratified/" + format_double(c.proportion)));
    }
    return sample_tfs(train, c.proportion, derive_seed(c.seed, "sample/tfs/" + format_double(c.proportion)));
}

void write_metrics_file(const fs::path& path, const RunKey& key, const MetricsTable& m,
                        const std::vector<std::string>& names) {
    std::ostringstream ss;
    ss << kMetricsCsvHeader << '\n';
    write_metrics_rows(ss, key, m, names);
    write_text(path, ss.str());
}

}  // namespace

bool cell_complete(const ExperimentSpec& spec, const Cell& c) { return fs::exists(cell_dir(spec, c) / kDoneMarker); }

CellResult run_cell(const ExperimentSpec& spec, const Cell& c) {
    const CellContext ctx = load_context(spec);
    const fs::path dir = cell_dir(spec, c);
    fs::create_directories(dir);
    fs::remove(dir / kDoneMarker);

    const LabeledDataset sample = sample_for(spec, c, ctx.train);
    auto m = build_cell_assembly(spec, c, ctx);

    CellResult result;
    std::vector<double> pretrain_seconds;
    if (uses_near_domain(spec.variant)) {
        const auto sam = build_stance_examples(near_domain_units(spec), *ctx.tokenizer, spec.max_length);
        TrainConfig pcfg = spec.pretrain;
        pcfg.seed = derive_seed(c.seed, "cell/pretrain");
        const auto plog = pretrain_near_domain(m, sam, pcfg);
        for (const auto& e : plog.epochs) pretrain_seconds.push_back(e.seconds);
        nn::serialize_trainable(m, dir / "pretrained.ckpt");
        continue_after_pretraining(m, spec.variant, ctx.pvp, derive_seed(c.seed, "cell/init"));
    }

    const auto train_examples = build_examples(sample, spec.variant, *ctx.tokenizer, ctx.pvp, spec.max_length);
    std::vector<Example> dev_examples;
    if (spec.train.best_epoch_selection) {
        dev_examples = build_examples(ctx.dev, spec.variant, *ctx.tokenizer, ctx.pvp, spec.max_length);
    }
    std::vector<std::vector<TokenId>> unlabeled;
    if (spec.variant == Variant::pet_full) {
        for (const auto& u : ctx.all.units) {
            unlabeled.push_back(build_standard_input(u, *ctx.tokenizer, spec.max_length).ids);
        }
    }
    TrainConfig cfg = spec.train;
    cfg.seed = derive_seed(c.seed, "cell/train");
    result.log = train(m, TrainData{&train_examples, dev_examples.empty() ? nullptr : &dev_examples, &unlabeled}, cfg);

    const auto test_examples = build_examples(ctx.test, spec.variant, *ctx.tokenizer, ctx.pvp, spec.max_length);
    const auto predicted = predict_all(m, test_examples);
    std::vector<Label> gold, pred;
    for (std::size_t i = 0; i < test_examples.size(); ++i) {
        gold.push_back(kAllLabels[test_examples[i].target]);
        pred.push_back(kAllLabels[predicted[i]]);
    }
    const Confusion conf = confusion(gold, pred);
    result.metrics = metrics(conf);
    result.stance_metrics = metrics(collapse_confusion(conf));
    result.errors = error_breakdown(gold, pred);

    const RunKey key{std::string(to_string(spec.variant)), std::string(to_string(spec.persons)),
                     std::string(to_string(spec.labels)), c.proportion, c.seed};
    write_metrics_file(dir / "metrics.csv", key, result.metrics, label_names());
    write_metrics_file(dir / "stance_metrics.csv", key, result.stance_metrics, stance_names());
    {
        std::ostringstream ss;
        ss << "concept_only,stance_only,concept_and_stance,stance_vs_none,total_errors\n"
           << result.errors.concept_only << ',' << result.errors.stance_only << ','
           << result.errors.concept_and_stance << ',' << result.errors.stance_vs_none << ','
           << result.errors.total_errors << '\n';
        write_text(dir / "errors.csv", ss.str());
    }
    {
        std::ostringstream ss;
        ss << "unit_id,gold,predicted\n";
        for (std::size_t i = 0; i < gold.size(); ++i) {
            ss << csv_field(ctx.test.units[i].unit_id) << ',' << to_string(gold[i]) << ',' << to_string(pred[i])
               << '\n';
        }
        write_text(dir / "predictions.csv", ss.str());
    }
    {
        std::ostringstream ss;
        write_train_log_csv(ss, result.log);
        write_text(dir / "train_log.csv", ss.str());
    }
    const auto info = nn::serialize_trainable(m, dir / "model.ckpt");
    result.checkpoint_bytes = info.header_bytes + info.payload_bytes;

    json acc;
    acc["variant"] = key.variant;
    acc["sample_size"] = sample.size();
    acc["epoch_seconds"] = json::array();
    for (const auto& e : result.log.epochs) acc["epoch_seconds"].push_back(e.seconds);
    acc["pretrain_epoch_seconds"] = pretrain_seconds;
    acc["total_parameters"] = result.log.report.total;
    acc["trainable_parameters"] = result.log.report.trainable;
    acc["checkpoint_bytes"] = result.checkpoint_bytes;
    write_text(dir / "accounting.json", acc.dump(2) + "\n");

    write_text(dir / kDoneMarker, "ok\n");
    return result;
}

MetricsTable cmd_evaluate(const ExperimentSpec& spec, const Cell& c, Split split) {
    const CellContext ctx = load_context(spec);
    const fs::path dir = cell_dir(spec, c);
    if (!fs::exists(dir / kDoneMarker)) throw ConfigError("cell '" + dir.string() + "' has not completed");
    auto m = build_cell_assembly(spec, c, ctx);
    if (uses_near_domain(spec.variant)) {
        nn::load_matching(dir / "pretrained.ckpt", m.parameters());
        continue_after_pretraining(m, spec.variant, ctx.pvp, derive_seed(c.seed, "cell/init"));
    }
    nn::deserialize_trainable(dir / "model.ckpt", m);
    const LabeledDataset& ds = split == Split::train ? ctx.train : split == Split::dev ? ctx.dev : ctx.test;
    return evaluate(m, build_examples(ds, spec.variant, *ctx.tokenizer, ctx.pvp, spec.max_length));
}

// --- sweep -------------------------------------------------------------------

SweepOutcome cmd_sweep(const ExperimentSpec& spec) {
    if (!fs::exists(spec.prepared_dir() / "manifest.json")) {
        throw ConfigError("no prepared data under '" + spec.prepared_dir().string() + "'; run prepare first");
    }
    const auto cells = sweep_cells(spec);
    SweepOutcome outcome;
    outcome.cells = cells.size();
    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cell_complete(spec, cells[i])) {
            ++outcome.skipped;
        } else {
            pending.push_back(i);
        }
    }

    std::map<pid_t, std::size_t> running;
    std::map<std::size_t, std::string> status;
    auto label = [&](std::size_t i) {
        return to_string(spec.variant).data() + std::string(" p=") + format_double(cells[i].proportion) +
               " seed=" + std::to_string(cells[i].seed);
    };
    std::size_t next = 0;
    std::cout.flush();
    std::cerr.flush();
    while (next < pending.size() || !running.empty()) {
        while (next < pending.size() && running.size() < spec.jobs) {
            const std::size_t i = pending[next++];
            const pid_t pid = fork();
            if (pid < 0) throw std::runtime_error("fork failed");
            if (pid == 0) {
                int code = 0;
                try {
                    run_cell(spec, cells[i]);
                } catch (const std::exception& e) {
                    std::ofstream(cell_dir(spec, cells[i]) / "error.txt") << e.what() << '\n';
                    std::cerr << "cell " << label(i) << " failed: " << e.what() << '\n';
                    code = 1;
                }
                std::cout.flush();
                std::cerr.flush();
                _exit(code);
            }
            running.emplace(pid, i);
        }
        int wstatus = 0;
        const pid_t done = waitpid(-1, &wstatus, 0);
        if (done < 0) throw std::runtime_error("waitpid failed");
        auto it = running.find(done);
        if (it == running.end()) continue;
        const std::size_t i = it->second;
        running.erase(it);
        const bool ok = WIFEXITED(wstatus) && WEXITSTATUS(wstatus) == 0 && cell_complete(spec, cells[i]);
        status[i] = ok ? "complete" : "failed";
        std::cerr << (ok ? "done   " : "FAILED ") << label(i) << '\n';
        if (!ok) {
            ++outcome.failed;
            outcome.failures.push_back(label(i));
        }
    }

    json manifest;
    manifest["spec"] = spec_to_key_values(spec);
    manifest["cells"] = json::array();
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto it = status.find(i);
        manifest["cells"].push_back({{"proportion", cells[i].proportion},
                                     {"seed", cells[i].seed},
                                     {"dir", fs::relative(cell_dir(spec, cells[i]), spec.out).generic_string()},
                                     {"status", it == status.end() ? "complete (resumed)" : it->second}});
    }
    fs::create_directories(spec.out);
    write_text(spec.out / "sweep_manifest.json", manifest.dump(2) + "\n");

    if (outcome.failed < outcome.cells) cmd_report(spec.out);
    return outcome;
}

// --- report ------------------------------------------------------------------

std::vector<RunRow> read_metrics_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || trim(line) != kMetricsCsvHeader) {
        throw LoadError("metrics CSV: unexpected header");
    }
    std::vector<RunRow> rows;
    std::size_t line_no = 1;
    std::optional<std::tuple<std::string, std::string, std::string, std::string, std::string>> current;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 12) throw LoadError("metrics CSV line " + std::to_string(line_no) + ": expected 12 fields");
        auto id = std::make_tuple(f[0], f[1], f[2], f[3], f[4]);
        try {
            if (!current || *current != id) {
                RunRow r;
                r.key = {f[0], f[1], f[2], to_real("proportion", f[3]), to_unsigned("seed", f[4])};
                r.metrics.accuracy = to_real("accuracy", f[9]);
                r.metrics.macro_f1 = to_real("macro_f1", f[10]);
                rows.push_back(std::move(r));
                current = id;
            }
            auto& m = rows.back().metrics;
            m.precision.push_back(to_real("precision", f[6]));
            m.recall.push_back(to_real("recall", f[7]));
            m.f1.push_back(to_real("f1", f[8]));
            m.support.push_back(to_unsigned("support", f[11]));
            m.precision_undefined.push_back(false);
            m.recall_undefined.push_back(m.support.back() == 0);
            if (m.support.back() == 0) m.has_zero_support = true;
        } catch (const ConfigError& e) {
            throw LoadError("metrics CSV line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return rows;
}

void write_aggregate_csv(std::ostream& out, const std::vector<RunRow>& rows,
                         const std::vector<std::string>& class_names) {
    using GroupKey = std::tuple<std::string, std::string, std::string, double>;
    std::map<GroupKey, std::vector<const MetricsTable*>> groups;
    for (const auto& r : rows) {
        if (r.metrics.classes() != class_names.size()) throw LoadError("aggregate: class count mismatch");
        groups[{r.key.variant, r.key.persons, r.key.labels, r.key.proportion}].push_back(&r.metrics);
    }
    out << "variant,persons,labels,proportion,runs";
    for (const auto& c : class_names) out << ',' << c << "_f1_mean," << c << "_f1_std";
    out << ",macro_f1_mean,macro_f1_std,accuracy_mean,accuracy_std\n";
    auto cell = [&](const std::vector<double>& v) {
        if (v.size() >= 2) {
            const auto s = summarize(v);
            out << ',' << format_fixed(s.mean, 4) << ',' << format_fixed(s.stddev, 4);
        } else {
            out << ',' << format_fixed(v.front(), 4) << ',';
        }
    };
    for (const auto& [key, tables] : groups) {
        const auto& [variant, persons, labels, proportion] = key;
        out << csv_field(variant) << ',' << csv_field(persons) << ',' << csv_field(labels) << ','
            << format_double(proportion) << ',' << tables.size();
        for (std::size_t c = 0; c < class_names.size(); ++c) {
            std::vector<double> v;
            for (const auto* t : tables) v.push_back(t->f1[c]);
            cell(v);
        }
        std::vector<double> macro, acc;
        for (const auto* t : tables) {
            macro.push_back(t->macro_f1);
            acc.push_back(t->accuracy);
        }
        cell(macro);
        cell(acc);
        out << '\n';
    }
}

ReportSummary cmd_report(const fs::path& out) {
    if (!fs::is_directory(out)) throw ConfigError("'" + out.string() + "' is not a directory");
    std::vector<fs::path> cells;
    for (const auto& entry : fs::recursive_directory_iterator(out)) {
        if (entry.is_regular_file() && entry.path().filename() == kDoneMarker) cells.push_back(entry.path().parent_path());
    }
    if (cells.empty()) throw ConfigError("no completed runs under '" + out.string() + "'");
    std::sort(cells.begin(), cells.end());

    std::vector<RunRow> runs, stance_runs;
    std::vector<RunAccounting> accounting;
    for (const auto& dir : cells) {
        std::ifstream m(dir / "metrics.csv");
        auto r = read_metrics_csv(m);
        runs.insert(runs.end(), r.begin(), r.end());
        std::ifstream s(dir / "stance_metrics.csv");
        auto sr = read_metrics_csv(s);
        stance_runs.insert(stance_runs.end(), sr.begin(), sr.end());
        const auto acc = json::parse(read_text(dir / "accounting.json"));
        RunAccounting a;
        a.variant = acc.at("variant").get<std::string>();
        a.epoch_seconds = acc.at("epoch_seconds").get<std::vector<double>>();
        a.total_parameters = acc.at("total_parameters").get<std::size_t>();
        a.trainable_parameters = acc.at("trainable_parameters").get<std::size_t>();
        a.checkpoint_bytes = acc.at("checkpoint_bytes").get<std::size_t>();
        accounting.push_back(std::move(a));
    }

    const fs::path report = out / "report";
    fs::create_directories(report);
    auto dump_runs = [&](const fs::path& path, const std::vector<RunRow>& rows, const std::vector<std::string>& names) {
        std::ostringstream ss;
        ss << kMetricsCsvHeader << '\n';
        for (const auto& r : rows) write_metrics_rows(ss, r.key, r.metrics, names);
        write_text(path, ss.str());
    };
    dump_runs(report / "runs.csv", runs, label_names());
    dump_runs(report / "stance_runs.csv", stance_runs, stance_names());
    {
        std::ostringstream ss;
        write_aggregate_csv(ss, runs, label_names());
        write_text(report / "aggregate.csv", ss.str());
    }
    {
        std::ostringstream ss;
        write_aggregate_csv(ss, stance_runs, stance_names());
        write_text(report / "stance_aggregate.csv", ss.str());
    }
    {
        std::ostringstream ss;
        write_feasibility_csv(ss, feasibility_report(accounting));
        write_text(report / "feasibility.csv", ss.str());
    }
    ReportSummary summary;
    summary.runs = runs.size();
    std::set<std::tuple<std::string, std::string, std::string, double>> groups;
    for (const auto& r : runs) groups.emplace(r.key.variant, r.key.persons, r.key.labels, r.key.proportion);
    summary.aggregated_groups = groups.size();
    return summary;
}

void write_stance_tsv(std::ostream& out, const std::vector<StanceUnit>& units) {
    out << "topic\tsentence\tannotation\tset\n";
    for (const auto& u : units) {
        const char* ann = u.stance == Stance::pro      ? "Argument_for"
                          : u.stance == Stance::contra ? "Argument_against"
                                                       : "NoArgument";
        std::string set = u.split ? std::string(to_string(*u.split)) : "train";
        if (set == "dev") set = "val";
        out << u.topic << '\t' << u.text << '\t' << ann << '\t' << set << '\n';
    }
}

}  // namespace argmine
