#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kbd/cli.hpp"
#include "kbd/config.hpp"
#include "kbd/errors.hpp"
#include "kbd/runner.hpp"

using namespace kbd;
namespace fs = std::filesystem;

namespace {

constexpr const char* kLabeledFixture = KBD_FIXTURE_DIR "/labeled_50.jsonl";
constexpr const char* kPhraseFile = KBD_RESOURCE_DIR "/uncertainty_phrases.txt";
constexpr const char* kExpertScript = KBD_RESOURCE_DIR "/expert_script.txt";
constexpr const char* kExampleConfig = KBD_CONFIG_DIR "/oracle.ini";

int cli(const std::vector<std::string>& args) {
    std::vector<std::string> store = {"kbd"};
    store.insert(store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    argv.reserve(store.size());
    for (const auto& s : store) argv.push_back(s.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

fs::path fresh_dir(const char* name) {
    const fs::path dir = fs::temp_directory_path() / "kbd_cli_tests" / name;
    fs::remove_all(dir);
    return dir;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t count_lines(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::size_t n = 0;
    std::string line;
    while (std::getline(in, line)) ++n;
    return n;
}

// keeps test runs fast: a 6x10 pool, 4 episodes of up to 6 steps
const std::vector<std::string> kSmallRun = {
    "--set", "run.n_episodes=4",      "--set", "run.max_steps=6",
    "--set", "generator.subtopics=6", "--set", "generator.questions_per_subtopic=10",
};

std::vector<std::string> with_small_run(std::vector<std::string> args) {
    args.insert(args.end(), kSmallRun.begin(), kSmallRun.end());
    return args;
}

}  // namespace

TEST_CASE("explore writes the full artifact set with an accurate manifest") {
    const fs::path dir = fresh_dir("explore_artifacts");
    const int status =
        cli(with_small_run({"explore", "--seed", "9", "--output", dir.string()}));
    REQUIRE(status == 0);

    for (const char* name : {"dataset.jsonl", "trace.jsonl", "rewards.csv",
                             "entropy_rounds.csv", "qtable.tsv", "manifest.json"}) {
        CHECK(fs::exists(dir / name));
    }

    std::ifstream manifest_in(dir / "manifest.json");
    const nlohmann::json manifest = nlohmann::json::parse(manifest_in);
    CHECK(manifest.at("command") == "explore");
    CHECK(manifest.at("status") == "complete");
    CHECK(manifest.at("seed") == 9);
    CHECK(manifest.at("episodes") == 4);

    const std::size_t records = manifest.at("records").get<std::size_t>();
    CHECK(count_lines(dir / "dataset.jsonl") == records);
    CHECK(count_lines(dir / "trace.jsonl") == records);
    const auto& counts = manifest.at("dataset");
    CHECK(counts.at("within").get<std::size_t>() + counts.at("beyond").get<std::size_t>() +
              counts.at("transition").get<std::size_t>() ==
          records);
    // rewards.csv: header + one row per episode
    CHECK(count_lines(dir / "rewards.csv") == 5);
}

TEST_CASE("explore is deterministic for a fixed seed and differs across seeds") {
    const fs::path a = fresh_dir("explore_det_a");
    const fs::path b = fresh_dir("explore_det_b");
    const fs::path c = fresh_dir("explore_det_c");
    REQUIRE(cli(with_small_run({"explore", "--seed", "11", "--output", a.string()})) == 0);
    REQUIRE(cli(with_small_run({"explore", "--seed", "11", "--output", b.string()})) == 0);
    REQUIRE(cli(with_small_run({"explore", "--seed", "12", "--output", c.string()})) == 0);

    for (const char* name : {"dataset.jsonl", "trace.jsonl", "rewards.csv",
                             "entropy_rounds.csv", "qtable.tsv", "manifest.json"}) {
        CHECK(read_file(a / name) == read_file(b / name));
    }
    CHECK(read_file(a / "dataset.jsonl") != read_file(c / "dataset.jsonl"));
}

TEST_CASE("validation problems exit with status 1") {
    const fs::path dir = fresh_dir("validation");
    // out-of-range hyperparameter
    CHECK(cli({"explore", "--output", dir.string(), "--set", "agent.gamma=1.2"}) == 1);
    // unknown config key
    CHECK(cli({"explore", "--output", dir.string(), "--set", "run.episodes=5"}) == 1);
    // malformed --set
    CHECK(cli({"explore", "--output", dir.string(), "--set", "novalue"}) == 1);
    // unknown flag
    CHECK(cli({"explore", "--output", dir.string(), "--bogus"}) == 1);
    // missing required --output
    CHECK(cli({"explore"}) == 1);
    // missing subcommand
    CHECK(cli({}) == 1);
    // baseline kind outside the allowed set
    CHECK(cli({"baseline", "greedy", "--output", dir.string()}) == 1);
}

TEST_CASE("help requests succeed") {
    CHECK(cli({"--help"}) == 0);
    CHECK(cli({"explore", "--help"}) == 0);
}

TEST_CASE("evaluate reproduces the fixture report and is idempotent") {
    const fs::path a = fresh_dir("evaluate_a");
    const fs::path b = fresh_dir("evaluate_b");
    const std::vector<std::string> args = {"evaluate", "--output", "",
                                           "--set", std::string("eval.input=") + kLabeledFixture};
    auto run_into = [&](const fs::path& dir) {
        std::vector<std::string> a2 = args;
        a2[2] = dir.string();
        return cli(a2);
    };
    REQUIRE(run_into(a) == 0);
    REQUIRE(run_into(b) == 0);
    CHECK(read_file(a / "report.json") == read_file(b / "report.json"));

    std::ifstream in(a / "report.json");
    const nlohmann::json report = nlohmann::json::parse(in);
    CHECK(report.at("k_aware").get<double>() == doctest::Approx(72.0));
    CHECK(report.at("u_aware").get<double>() == doctest::Approx(80.0));
    CHECK(report.at("s_aware").get<double>() == doctest::Approx(76.0));
    CHECK(report.at("eer").get<double>() == doctest::Approx(0.16).epsilon(1e-9));
    CHECK(report.at("f1").get<double>() == doctest::Approx(40.0 / 49.0).epsilon(1e-9));
    CHECK(report.at("n") == 50);
    CHECK(report.at("skipped") == 0);
}

TEST_CASE("evaluate with the similarity estimator uses the bundled phrases") {
    const fs::path dir = fresh_dir("evaluate_similarity");
    const int status = cli({"evaluate", "--output", dir.string(),
                            "--set", std::string("eval.input=") + kLabeledFixture,
                            "--set", "eval.estimator=similarity",
                            "--set", std::string("eval.phrases=") + kPhraseFile});
    REQUIRE(status == 0);
    std::ifstream in(dir / "report.json");
    const nlohmann::json report = nlohmann::json::parse(in);
    CHECK(report.at("k_aware").get<double>() == doctest::Approx(72.0));
    CHECK(report.at("u_aware").get<double>() == doctest::Approx(84.0));
    CHECK(report.at("s_aware").get<double>() == doctest::Approx(78.0));
    CHECK(report.at("f1").get<double>() == doctest::Approx(0.84).epsilon(1e-9));
    CHECK(report.at("estimator") == "similarity");
}

TEST_CASE("evaluate failure modes map to the documented exit codes") {
    const fs::path dir = fresh_dir("evaluate_fail");
    // no input configured -> validation error
    CHECK(cli({"evaluate", "--output", dir.string()}) == 1);
    // missing input file -> environment failure
    CHECK(cli({"evaluate", "--output", dir.string(), "--set",
               "eval.input=/nonexistent/items.jsonl"}) == 2);

    // single-class dataset -> degenerate labels, validation error
    const fs::path one_sided = dir / "one_sided.jsonl";
    fs::create_directories(dir);
    {
        std::ofstream out(one_sided);
        out << "{\"question\":\"a\",\"gold_label\":\"answerable\",\"entropy\":10.0}\n";
        out << "{\"question\":\"b\",\"gold_label\":\"answerable\",\"entropy\":12.0}\n";
    }
    CHECK(cli({"evaluate", "--output", dir.string(), "--set",
               "eval.input=" + one_sided.string()}) == 1);
}

TEST_CASE("export bins the dataset and copies curve tables") {
    const fs::path run_dir = fresh_dir("export_run");
    fs::create_directories(run_dir);
    {
        std::ofstream out(run_dir / "dataset.jsonl");
        out << "{\"text\":\"a\",\"entropy\":26.3,\"label\":\"within\",\"topic\":\"t\","
               "\"episode\":0,\"step\":1}\n";
        out << "{\"text\":\"b\",\"entropy\":27.8,\"label\":\"within\",\"topic\":\"t\","
               "\"episode\":0,\"step\":2}\n";
        out << "{\"text\":\"c\",\"entropy\":205.7,\"label\":\"beyond\",\"topic\":\"t\","
               "\"episode\":0,\"step\":3}\n";
    }
    {
        std::ofstream out(run_dir / "rewards.csv");
        out << "episode,cumulative_reward\n1,5.000000\n";
    }

    const fs::path out_dir = fresh_dir("export_out");
    REQUIRE(cli({"export", "--output", out_dir.string(), "--set",
                 "export.run=" + run_dir.string()}) == 0);
    CHECK(read_file(out_dir / "histogram.csv") ==
          "bin_start,bin_end,count\n"
          "20.000000,30.000000,2\n"
          "200.000000,210.000000,1\n");
    CHECK(read_file(out_dir / "rewards.csv") == read_file(run_dir / "rewards.csv"));
    CHECK(!fs::exists(out_dir / "entropy_rounds.csv"));  // source had none
}

TEST_CASE("export handles empty and missing datasets") {
    const fs::path empty_run = fresh_dir("export_empty");
    fs::create_directories(empty_run);
    std::ofstream(empty_run / "dataset.jsonl").close();
    const fs::path out_dir = fresh_dir("export_empty_out");
    REQUIRE(cli({"export", "--output", out_dir.string(), "--set",
                 "export.run=" + empty_run.string()}) == 0);
    CHECK(read_file(out_dir / "histogram.csv") == "bin_start,bin_end,count\n");

    const fs::path missing = fresh_dir("export_missing");
    CHECK(cli({"export", "--output", out_dir.string(), "--set",
               "export.run=" + missing.string()}) == 2);
    // export.run unset is a validation error
    CHECK(cli({"export", "--output", out_dir.string()}) == 1);
}

TEST_CASE("export accepts a simulate landscape directly") {
    const fs::path sim_dir = fresh_dir("export_sim");
    REQUIRE(cli({"simulate", "--seed", "5", "--output", sim_dir.string(), "--set",
                 "sim.questions=60"}) == 0);
    const fs::path out_dir = fresh_dir("export_sim_out");
    REQUIRE(cli({"export", "--output", out_dir.string(), "--set",
                 "export.run=" + sim_dir.string()}) == 0);
    CHECK(fs::exists(out_dir / "histogram.csv"));

    // counts in the histogram sum to the landscape line count
    std::ifstream in(out_dir / "histogram.csv");
    std::string line;
    std::getline(in, line);  // header
    std::size_t total = 0;
    while (std::getline(in, line)) {
        total += std::stoull(line.substr(line.rfind(',') + 1));
    }
    CHECK(total == count_lines(sim_dir / "landscape.jsonl"));
}

TEST_CASE("baseline random disables learning and stays deterministic") {
    const fs::path a = fresh_dir("baseline_rand_a");
    const fs::path b = fresh_dir("baseline_rand_b");
    REQUIRE(cli(with_small_run(
                {"baseline", "random", "--seed", "4", "--output", a.string()})) == 0);
    REQUIRE(cli(with_small_run(
                {"baseline", "random", "--seed", "4", "--output", b.string()})) == 0);

    // q-table snapshot holds the header line only: no updates happened
    CHECK(count_lines(a / "qtable.tsv") == 1);
    CHECK(read_file(a / "rewards.csv") == read_file(b / "rewards.csv"));

    std::ifstream in(a / "manifest.json");
    const nlohmann::json manifest = nlohmann::json::parse(in);
    CHECK(manifest.at("command") == "baseline");
    CHECK(manifest.at("kind") == "random");
}

TEST_CASE("baseline scripted-expert replays the bundled script to exhaustion") {
    const fs::path dir = fresh_dir("baseline_expert");
    // e_threshold 0 keeps within-seek from stopping early, so every episode
    // runs the full 10-line script
    const int status = cli({"baseline", "scripted-expert", "--seed", "3",
                            "--output", dir.string(),
                            "--set", std::string("run.question_file=") + kExpertScript,
                            "--set", "run.n_episodes=3",
                            "--set", "run.e_threshold=0"});
    REQUIRE(status == 0);

    std::ifstream in(dir / "manifest.json");
    const nlohmann::json manifest = nlohmann::json::parse(in);
    CHECK(manifest.at("kind") == "scripted-expert");
    CHECK(manifest.at("records") == 30);  // 3 episodes x 10 scripted questions

    // the expert stays inside the known facets, so everything lands within
    in.close();
    std::ifstream trace(dir / "trace.jsonl");
    std::string line;
    std::size_t lines = 0;
    while (std::getline(trace, line)) {
        ++lines;
        CHECK(line.find("\"label\":\"within\"") != std::string::npos);
    }
    CHECK(lines == 30);

    // a missing script file is a validation error
    CHECK(cli({"baseline", "scripted-expert", "--output", dir.string()}) == 1);
}

TEST_CASE("simulate writes a loadable landscape") {
    const fs::path dir = fresh_dir("simulate");
    REQUIRE(cli({"simulate", "--seed", "21", "--output", dir.string(), "--set",
                 "sim.questions=150"}) == 0);
    const BoundaryDataset landscape = import_dataset((dir / "landscape.jsonl").string());
    CHECK(landscape.size() == 150);
    CHECK(!landscape.within.empty());
    CHECK(!landscape.beyond.empty());
    CHECK(landscape.transition.empty());  // default transition_fraction is 0

    std::ifstream in(dir / "manifest.json");
    const nlohmann::json manifest = nlohmann::json::parse(in);
    CHECK(manifest.at("command") == "simulate");
    CHECK(manifest.at("questions") == 150);
    CHECK(manifest.at("dataset").at("within") == landscape.within.size());

    // everything lands in the transition band when the fraction is 1
    const fs::path all_mid = fresh_dir("simulate_mid");
    REQUIRE(cli({"simulate", "--seed", "21", "--output", all_mid.string(), "--set",
                 "sim.questions=80", "--set", "oracle.transition_fraction=1.0"}) == 0);
    const BoundaryDataset mid = import_dataset((all_mid / "landscape.jsonl").string());
    CHECK(mid.transition.size() == 80);
}

TEST_CASE("the bundled example config mirrors the built-in defaults") {
    const KeyValues values = parse_config_file(kExampleConfig);
    CHECK(values.size() >= 25);
    const Settings from_file = build_settings(values, {}, std::nullopt);
    const Settings defaults = build_settings({}, {}, std::nullopt);
    CHECK(from_file.run.n_episodes == defaults.run.n_episodes);
    CHECK(from_file.run.max_steps == defaults.run.max_steps);
    CHECK(from_file.run.topic == defaults.run.topic);
    CHECK(from_file.run.e_threshold == defaults.run.e_threshold);
    CHECK(from_file.run.master_seed == defaults.run.master_seed);
    CHECK(from_file.run.agent.alpha == defaults.run.agent.alpha);
    CHECK(from_file.run.agent.gamma == defaults.run.agent.gamma);
    CHECK(from_file.run.agent.epsilon == defaults.run.agent.epsilon);
    CHECK(from_file.run.encoder.beta == defaults.run.encoder.beta);
    CHECK(from_file.run.encoder.e_th == defaults.run.encoder.e_th);
    CHECK(from_file.run.oracle.unknown_entropy.mean ==
          defaults.run.oracle.unknown_entropy.mean);
    REQUIRE(from_file.run.oracle.known_topics.size() ==
            defaults.run.oracle.known_topics.size());
    for (const auto& [label, profile] : defaults.run.oracle.known_topics) {
        REQUIRE(from_file.run.oracle.known_topics.count(label) == 1);
        CHECK(from_file.run.oracle.known_topics.at(label).mean == profile.mean);
        CHECK(from_file.run.oracle.known_topics.at(label).std == profile.std);
    }
    CHECK(from_file.run.template_pool.subtopics == defaults.run.template_pool.subtopics);
    CHECK(from_file.eval.threshold == defaults.eval.threshold);
    CHECK(from_file.histogram_bin_width == defaults.histogram_bin_width);
    CHECK(from_file.sim_questions == defaults.sim_questions);

    // and the file actually drives a run
    const fs::path dir = fresh_dir("config_run");
    CHECK(cli(with_small_run({"explore", "--config", kExampleConfig, "--output",
                              dir.string()})) == 0);
}

TEST_CASE("output directories are created recursively") {
    const fs::path dir = fresh_dir("nested") / "a" / "b" / "c";
    CHECK(cli({"simulate", "--output", dir.string(), "--set", "sim.questions=5"}) == 0);
    CHECK(fs::exists(dir / "landscape.jsonl"));
}

TEST_CASE("run_invocation rejects unknown commands") {
    CliInvocation inv;
    inv.command = "train";
    inv.output_dir = fresh_dir("unknown_cmd").string();
    CHECK_THROWS_WITH_AS(run_invocation(inv), "unknown command: train", ConfigError);
}
