// Command-line front end: prepare, train, evaluate, sweep, report and
// synthesize. Every subcommand reads the same flat experiment config;
// flags override individual keys.

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "argmine/errors.hpp"
#include "argmine/experiment.hpp"
#include "argmine/synthetic.hpp"
#include "argmine/text.hpp"

namespace {

using namespace argmine;

struct SpecOptions {
    std::string config;
    std::string dataset, persons, labels, variant, pvp, proportions, mode, seeds, out;
    std::size_t jobs = 0;
    std::vector<std::string> overrides;

    void attach(CLI::App* cmd) {
        cmd->add_option("-c,--config", config, "experiment config (key = value lines)");
        cmd->add_option("--dataset", dataset, "labeled dataset (JSONL)");
        cmd->add_option("--persons", persons, "original | shuffled");
        cmd->add_option("--labels", labels, "original | onion");
        cmd->add_option("--variant", variant,
                        "ft | ft_sam | adapter | adapter_sam | pet_full | adapter_pet | adapter_sam_pet");
        cmd->add_option("--pvp", pvp, "naive | elaborate");
        cmd->add_option("--proportions", proportions, "comma-separated training proportions");
        cmd->add_option("--mode", mode, "stratified | tfs");
        cmd->add_option("--seeds", seeds, "comma-separated repetition seeds");
        cmd->add_option("--out", out, "output directory");
        cmd->add_option("--jobs", jobs, "parallel sweep workers");
        cmd->add_option("--set", overrides, "extra key=value overrides")->take_all();
    }

    ExperimentSpec resolve() const {
        std::map<std::string, std::string> kv;
        if (!config.empty()) kv = load_key_values(config);
        auto put = [&](const char* key, const std::string& v) {
            if (!v.empty()) kv[key] = v;
        };
        put("dataset", dataset);
        put("persons", persons);
        put("labels", labels);
        put("variant", variant);
        put("pvp", pvp);
        put("proportions", proportions);
        put("mode", mode);
        put("seeds", seeds);
        put("out", out);
        if (jobs > 0) kv["jobs"] = std::to_string(jobs);
        for (const auto& o : overrides) {
            const auto eq = o.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
            kv[trim(std::string_view(o).substr(0, eq))] = trim(std::string_view(o).substr(eq + 1));
        }
        return spec_from_key_values(kv);
    }
};

void print_metrics(const MetricsTable& m, const std::vector<std::string>& names) {
    std::cout << "class,precision,recall,f1,support\n";
    for (std::size_t c = 0; c < m.classes(); ++c) {
        std::cout << names[c] << ',' << format_fixed(m.precision[c], 4) << ',' << format_fixed(m.recall[c], 4)
                  << ',' << format_fixed(m.f1[c], 4) << ',' << m.support[c] << '\n';
    }
    std::cout << "accuracy," << format_fixed(m.accuracy, 4) << "\nmacro_f1," << format_fixed(m.macro_f1, 4) << '\n';
}

Cell pick_cell(const ExperimentSpec& spec, std::optional<double> proportion, std::optional<std::uint64_t> seed) {
    return {proportion.value_or(spec.proportions.front()), seed.value_or(spec.seeds.front())};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"argmine: few-shot argument and stance classification experiments"};
    app.require_subcommand(1);

    SpecOptions prepare_opts, train_opts, eval_opts, sweep_opts;
    auto* prepare = app.add_subcommand("prepare", "downsample, split and transform the dataset");
    prepare_opts.attach(prepare);

    std::optional<double> train_proportion, eval_proportion;
    std::optional<std::uint64_t> train_seed, eval_seed;
    auto* train_cmd = app.add_subcommand("train", "train and evaluate one (proportion, seed) cell");
    train_opts.attach(train_cmd);
    train_cmd->add_option("--proportion", train_proportion, "training proportion (default: first listed)");
    train_cmd->add_option("--seed", train_seed, "repetition seed (default: first listed)");

    std::string eval_split = "test";
    auto* eval_cmd = app.add_subcommand("evaluate", "score a trained cell's checkpoint");
    eval_opts.attach(eval_cmd);
    eval_cmd->add_option("--proportion", eval_proportion, "training proportion of the cell");
    eval_cmd->add_option("--seed", eval_seed, "repetition seed of the cell");
    eval_cmd->add_option("--split", eval_split, "train | dev | test");

    auto* sweep = app.add_subcommand("sweep", "run every (proportion x seed) cell, then report");
    sweep_opts.attach(sweep);

    std::string report_dir;
    auto* report = app.add_subcommand("report", "collect run reports into CSV tables");
    report->add_option("dir", report_dir, "experiment output directory")->required();

    std::string synth_out;
    std::size_t synth_units = 500, synth_stance = 300;
    std::uint64_t synth_seed = 0;
    auto* synth = app.add_subcommand("synthesize", "write a seeded toy corpus for trying the pipeline");
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--units", synth_units, "labeled units");
    synth->add_option("--stance-units", synth_stance, "near-domain stance units");
    synth->add_option("--seed", synth_seed, "generator seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (prepare->parsed()) {
            const auto spec = prepare_opts.resolve();
            const auto s = cmd_prepare(spec);
            std::cout << "prepared " << spec.prepared_dir().string() << " (person spans replaced: "
                      << s.replaced_spans << ")\n";
        } else if (train_cmd->parsed()) {
            const auto spec = train_opts.resolve();
            const auto r = run_cell(spec, pick_cell(spec, train_proportion, train_seed));
            print_metrics(r.metrics, label_names());
        } else if (eval_cmd->parsed()) {
            const auto spec = eval_opts.resolve();
            const auto split = parse_split(eval_split);
            if (!split) throw ConfigError("--split: expected train, dev or test");
            print_metrics(cmd_evaluate(spec, pick_cell(spec, eval_proportion, eval_seed), *split), label_names());
        } else if (sweep->parsed()) {
            const auto outcome = cmd_sweep(sweep_opts.resolve());
            std::cout << outcome.cells << " cells, " << outcome.skipped << " already complete, " << outcome.failed
                      << " failed\n";
            for (const auto& f : outcome.failures) std::cout << "failed: " << f << '\n';
            return outcome.ok() ? 0 : 1;
        } else if (report->parsed()) {
            const auto s = cmd_report(report_dir);
            std::cout << s.runs << " runs in " << s.aggregated_groups << " groups\n";
        } else if (synth->parsed()) {
            std::filesystem::create_directories(synth_out);
            SyntheticConfig cfg;
            cfg.units = synth_units;
            cfg.seed = synth_seed;
            const std::filesystem::path dir = synth_out;
            save_dataset(dir / "dataset.jsonl", synthesize_dataset(cfg));
            std::ofstream persons(dir / "persons.txt");
            for (const auto& n : synthetic_person_names()) persons << n << '\n';
            std::ofstream stance(dir / "near_domain.tsv");
            write_stance_tsv(stance, synthesize_stance(synth_stance, synth_seed));
            std::cout << "wrote " << dir.string() << "/{dataset.jsonl,persons.txt,near_domain.tsv}\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
