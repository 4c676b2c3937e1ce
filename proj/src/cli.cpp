#include "kbd/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>

#include <CLI11.hpp>
#include <json.hpp>

#include "kbd/config.hpp"
#include "kbd/errors.hpp"
#include "kbd/eval.hpp"
#include "kbd/oracle.hpp"
#include "kbd/runner.hpp"

namespace fs = std::filesystem;

namespace kbd {

namespace {

Settings resolve_settings(const CliInvocation& inv) {
    KeyValues file_values;
    if (!inv.config_path.empty()) file_values = parse_config_file(inv.config_path);
    KeyValues overrides;
    for (const auto& spec : inv.overrides) overrides.push_back(split_override(spec));
    return build_settings(file_values, overrides, inv.seed);
}

fs::path ensure_output_dir(const std::string& dir) {
    if (dir.empty()) throw ConfigError("--output must name a directory");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoFailure("cannot create output directory " + dir + ": " + ec.message());
    return fs::path(dir);
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out.good()) throw IoFailure("cannot write " + path.string());
    out << content;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path);
    if (!in.good()) throw IoFailure("cannot read " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_manifest(const fs::path& dir, nlohmann::ordered_json manifest) {
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

double rolling_mean_tail(const std::vector<double>& values, std::size_t window) {
    if (values.empty()) return 0.0;
    const std::size_t n = std::min(window, values.size());
    const double sum = std::accumulate(values.end() - static_cast<std::ptrdiff_t>(n),
                                       values.end(), 0.0);
    return sum / static_cast<double>(n);
}

// explore and both baselines share the full train-and-export pipeline
int run_and_export(const CliInvocation& inv, Settings settings) {
    settings.run.validate();
    const fs::path dir = ensure_output_dir(inv.output_dir);

    const TrainingResult result = run_training(settings.run);

    export_dataset(result.dataset, (dir / "dataset.jsonl").string());
    export_trace(result.episodes, (dir / "trace.jsonl").string());
    export_curves(result.rewards, result.entropy_by_round, (dir / "rewards.csv").string(),
                  (dir / "entropy_rounds.csv").string());
    result.qtable.save((dir / "qtable.tsv").string());

    std::size_t records = 0;
    for (const auto& trace : result.episodes) records += trace.records.size();

    nlohmann::ordered_json manifest;
    manifest["command"] = inv.command;
    if (!inv.baseline_kind.empty()) manifest["kind"] = inv.baseline_kind;
    manifest["status"] = result.aborted ? "incomplete" : "complete";
    manifest["seed"] = settings.run.master_seed;
    manifest["episodes"] = result.episodes.size();
    manifest["records"] = records;
    manifest["dataset"] = {{"within", result.dataset.within.size()},
                           {"beyond", result.dataset.beyond.size()},
                           {"transition", result.dataset.transition.size()}};
    if (result.aborted) manifest["abort_reason"] = result.abort_reason;
    write_manifest(dir, manifest);

    std::printf("episodes %zu  records %zu  dataset within %zu beyond %zu transition %zu\n",
                result.episodes.size(), records, result.dataset.within.size(),
                result.dataset.beyond.size(), result.dataset.transition.size());
    std::printf("final rolling-50 reward mean %.6f\n", rolling_mean_tail(result.rewards, 50));

    if (result.aborted) {
        std::fprintf(stderr, "run aborted: %s\n", result.abort_reason.c_str());
        return 2;
    }
    return 0;
}

int do_explore(const CliInvocation& inv) { return run_and_export(inv, resolve_settings(inv)); }

int do_baseline(const CliInvocation& inv) {
    Settings settings = resolve_settings(inv);
    if (inv.baseline_kind == "random") {
        settings.run.agent.epsilon = 1.0;
        settings.run.agent.epsilon_decay = 0.0;
        settings.run.updates_enabled = false;
    } else if (inv.baseline_kind == "scripted-expert") {
        settings.run.generator_kind = GeneratorKind::Script;
    } else {
        throw ConfigError("baseline kind must be random or scripted-expert, got '" +
                          inv.baseline_kind + "'");
    }
    return run_and_export(inv, settings);
}

int do_simulate(const CliInvocation& inv) {
    const Settings settings = resolve_settings(inv);
    const RunConfig& run = settings.run;
    run.encoder.validate();
    run.template_pool.validate();
    run.oracle.validate();
    if (settings.sim_questions < 1) throw ConfigError("sim.questions must be >= 1");
    const fs::path dir = ensure_output_dir(inv.output_dir);

    OracleConfig oracle_config = run.oracle;
    if (oracle_config.seed == 0) oracle_config.seed = subseed(run.master_seed, "oracle");
    SimulatedOracle oracle(oracle_config);
    TemplateGenerator generator(run.topic, run.template_pool);
    const std::vector<Question>& pool = generator.pool();

    // deterministic sample without replacement
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(subseed(run.master_seed, "simulate"));
    const std::size_t n = std::min<std::size_t>(pool.size(),
                                                static_cast<std::size_t>(settings.sim_questions));
    for (std::size_t i = 0; i < n; ++i) {
        std::swap(order[i], order[i + rng.index(order.size() - i)]);
    }

    BoundaryDataset landscape;
    for (std::size_t i = 0; i < n; ++i) {
        const Question& question = pool[order[i]];
        const Response response = oracle.ask(question, {});
        DatasetEntry entry{question.text, response.entropy.value, question.topic, 0,
                           static_cast<int>(i) + 1};
        switch (classify_boundary(response.entropy, run.encoder)) {
            case BoundaryLabel::Within: landscape.within.push_back(entry); break;
            case BoundaryLabel::Beyond: landscape.beyond.push_back(entry); break;
            case BoundaryLabel::Transition: landscape.transition.push_back(entry); break;
        }
    }
    export_dataset(landscape, (dir / "landscape.jsonl").string());

    nlohmann::ordered_json manifest;
    manifest["command"] = inv.command;
    manifest["status"] = "complete";
    manifest["seed"] = run.master_seed;
    manifest["questions"] = n;
    manifest["dataset"] = {{"within", landscape.within.size()},
                           {"beyond", landscape.beyond.size()},
                           {"transition", landscape.transition.size()}};
    write_manifest(dir, manifest);

    std::printf("questions %zu  within %zu beyond %zu transition %zu\n", n,
                landscape.within.size(), landscape.beyond.size(), landscape.transition.size());
    return 0;
}

int do_evaluate(const CliInvocation& inv) {
    Settings settings = resolve_settings(inv);
    if (settings.eval_input.empty()) {
        throw ConfigError("eval.input must point at a labeled dataset");
    }
    if (!settings.phrase_file.empty()) {
        settings.eval.phrases = load_phrase_file(settings.phrase_file);
    }
    settings.eval.validate();
    const fs::path dir = ensure_output_dir(inv.output_dir);

    std::size_t skipped = 0;
    std::vector<LabeledItem> items = load_labeled_items(settings.eval_input, &skipped);
    MetricReport report = evaluate_items(std::move(items), settings.eval);
    report.skipped = skipped;
    write_report(report, (dir / "report.json").string());

    std::printf("n %zu  skipped %zu  estimator %s  correctness %s\n", report.n, report.skipped,
                report.estimator.c_str(), report.correctness_mode.c_str());
    std::printf("k_aware %.1f  u_aware %.1f  s_aware %.1f  eer %.6f  f1 %.6f\n", report.k_aware,
                report.u_aware, report.s_aware, report.eer, report.f1);
    return 0;
}

int do_export(const CliInvocation& inv) {
    const Settings settings = resolve_settings(inv);
    if (settings.export_run.empty()) {
        throw ConfigError("export.run must name a completed run directory");
    }
    if (!(settings.histogram_bin_width > 0.0)) {
        throw ConfigError("export.bin_width must be > 0");
    }
    const fs::path run_dir(settings.export_run);
    const fs::path dir = ensure_output_dir(inv.output_dir);

    // landscape.jsonl (simulate) and dataset.jsonl (explore) share a format
    fs::path dataset_path = run_dir / "dataset.jsonl";
    if (!fs::exists(dataset_path) && fs::exists(run_dir / "landscape.jsonl")) {
        dataset_path = run_dir / "landscape.jsonl";
    }
    const BoundaryDataset dataset = import_dataset(dataset_path.string());

    std::vector<const DatasetEntry*> entries;
    for (const auto& e : dataset.within) entries.push_back(&e);
    for (const auto& e : dataset.beyond) entries.push_back(&e);
    for (const auto& e : dataset.transition) entries.push_back(&e);

    const double width = settings.histogram_bin_width;
    std::map<long long, std::size_t> bins;
    for (const DatasetEntry* entry : entries) {
        bins[static_cast<long long>(std::floor(entry->entropy / width))]++;
    }
    std::string histogram = "bin_start,bin_end,count\n";
    for (const auto& [bin, count] : bins) {
        char line[96];
        std::snprintf(line, sizeof(line), "%.6f,%.6f,%zu\n",
                      static_cast<double>(bin) * width,
                      static_cast<double>(bin + 1) * width, count);
        histogram += line;
    }
    write_text(dir / "histogram.csv", histogram);

    // curve tables ride along when the run has them (simulate runs do not)
    std::size_t curves = 0;
    for (const char* name : {"rewards.csv", "entropy_rounds.csv"}) {
        if (fs::exists(run_dir / name)) {
            write_text(dir / name, read_text(run_dir / name));
            ++curves;
        }
    }

    std::printf("questions %zu  histogram bins %zu  bin width %.6f  curve tables %zu\n",
                entries.size(), bins.size(), width, curves);
    return 0;
}

}  // namespace

int run_invocation(const CliInvocation& invocation) {
    if (invocation.command == "explore") return do_explore(invocation);
    if (invocation.command == "simulate") return do_simulate(invocation);
    if (invocation.command == "evaluate") return do_evaluate(invocation);
    if (invocation.command == "export") return do_export(invocation);
    if (invocation.command == "baseline") return do_baseline(invocation);
    throw ConfigError("unknown command: " + invocation.command);
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"knowledge boundary discovery toolkit", "kbd"};
    app.require_subcommand(1);

    CliInvocation inv;
    auto add_common = [&inv](CLI::App* cmd) {
        cmd->add_option("--config", inv.config_path, "key=value config file");
        cmd->add_option("--seed", inv.seed, "master seed override");
        cmd->add_option("--output", inv.output_dir, "output directory")->required();
        cmd->add_option("--set", inv.overrides, "override a config key (repeatable)");
    };

    add_common(app.add_subcommand("explore", "train the boundary-probing agent"));
    add_common(app.add_subcommand("simulate", "sample the simulated oracle's entropy landscape"));
    add_common(app.add_subcommand("evaluate", "score a labeled dataset"));
    add_common(app.add_subcommand("export", "derive histogram and curve tables from a run"));
    CLI::App* baseline = app.add_subcommand("baseline", "run a non-learning reference policy");
    baseline->add_option("kind", inv.baseline_kind, "random or scripted-expert")
        ->required()
        ->check(CLI::IsMember({"random", "scripted-expert"}));
    add_common(baseline);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
        std::fprintf(stderr, "%s\n", e.what());
        return 1;
    }

    inv.command = app.get_subcommands().front()->get_name();
    try {
        return run_invocation(inv);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const DegenerateLabels& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 1;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}

}  // namespace kbd
