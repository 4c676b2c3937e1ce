#include "kbd/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "kbd/endpoint.hpp"
#include "kbd/errors.hpp"
#include "kbd/oracle.hpp"

namespace kbd {

namespace {

std::string json_text(const std::string& text) { return nlohmann::json(text).dump(); }

BoundaryLabel label_from_string(const std::string& text) {
    if (text == "within") return BoundaryLabel::Within;
    if (text == "beyond") return BoundaryLabel::Beyond;
    if (text == "transition") return BoundaryLabel::Transition;
    throw IoFailure("unknown label '" + text + "' in dataset");
}

std::unique_lock<std::mutex> maybe_lock(std::mutex* mutex) {
    return mutex ? std::unique_lock<std::mutex>(*mutex) : std::unique_lock<std::mutex>();
}

}  // namespace

const char* to_string(SeekMode mode) {
    return mode == SeekMode::Within ? "within" : "beyond";
}

const char* to_string(TerminationReason reason) {
    switch (reason) {
        case TerminationReason::Boundary: return "boundary";
        case TerminationReason::MaxSteps: return "max_steps";
        case TerminationReason::Error: return "error";
    }
    return "error";
}

void RunConfig::validate() const {
    if (n_episodes < 1) throw ConfigError("run.n_episodes must be >= 1");
    if (max_steps < 1) throw ConfigError("run.max_steps must be >= 1");
    if (e_threshold < 0.0) throw ConfigError("run.e_threshold must be >= 0");
    if (topic.empty()) throw ConfigError("run.topic must not be empty");
    if (candidate_k < 1) throw ConfigError("run.candidate_k must be >= 1");
    if (bins < 1) throw ConfigError("run.bins must be >= 1");
    if (step_cap < 0) throw ConfigError("run.step_cap must be >= 0");
    if (abort_after_consecutive_errors < 1)
        throw ConfigError("run.abort_after_errors must be >= 1");
    if (parallel < 0) throw ConfigError("run.parallel must be >= 0");
    agent.validate();
    encoder.validate();
    if (env_kind == EnvKind::Oracle) oracle.validate();
    if (env_kind == EnvKind::Endpoint) endpoint.validate();
    if (generator_kind == GeneratorKind::Template) template_pool.validate();
    if ((generator_kind == GeneratorKind::SeedFile || generator_kind == GeneratorKind::Script) &&
        question_file.empty()) {
        throw ConfigError("run.question_file is required for seed-file and script generators");
    }
}

ActionId action_id_for(const Question& question, ActionIdentity identity) {
    return identity == ActionIdentity::Topic ? fnv1a(question.topic) : fnv1a(question.text);
}

EpisodeTrace run_episode(EpisodeContext& ctx, const RunConfig& config) {
    EpisodeTrace trace;
    trace.episode = ctx.episode_index;

    Rng agent_rng(mix_seed(ctx.agent_seed, static_cast<std::uint64_t>(ctx.episode_index)));
    Rng gen_rng(mix_seed(ctx.generator_seed, static_cast<std::uint64_t>(ctx.episode_index)));

    AgentParams params = config.agent;
    params.epsilon = config.agent.epsilon_for_episode(ctx.episode_index);

    BeliefState belief;
    belief.topic = config.topic;
    History history;
    std::optional<double> prev_entropy;

    std::vector<Question> candidates;
    try {
        candidates =
            ctx.generator.generate_candidates(config.topic, belief, history, config.candidate_k,
                                              gen_rng);
    } catch (const GeneratorExhausted&) {
        trace.terminated_by = TerminationReason::MaxSteps;
        return trace;
    } catch (const Error& e) {
        trace.terminated_by = TerminationReason::Error;
        trace.error = e.what();
        return trace;
    }

    for (int step = 1; step <= config.max_steps; ++step) {
        const BeliefKey key =
            belief_key(belief, prev_entropy, config.encoder, config.bins, config.step_cap);

        std::vector<ActionId> ids;
        ids.reserve(candidates.size());
        for (const auto& q : candidates) ids.push_back(action_id_for(q, config.action_identity));

        std::size_t pick = 0;
        if (step == 1 && config.random_first_question) {
            if (candidates.empty()) throw EmptyActionSet();
            pick = agent_rng.index(candidates.size());
        } else {
            auto lock = maybe_lock(ctx.q_mutex);
            pick = select_action_index(ctx.qtable, key, ids, params, agent_rng);
        }
        const Question question = candidates[pick];
        const ActionId action = ids[pick];

        Response response;
        try {
            response = ctx.env.ask(question, history);
        } catch (const Error& e) {
            trace.terminated_by = TerminationReason::Error;
            trace.error = e.what();
            return trace;
        }

        const double entropy = response.entropy.value;
        const double step_reward =
            config.reward_mode == RewardMode::Delta ? reward(prev_entropy, entropy) : entropy;

        BeliefState next_belief = belief;
        next_belief.probs.push_back(belief_probability(entropy, config.encoder));
        const BeliefKey next_key =
            belief_key(next_belief, entropy, config.encoder, config.bins, config.step_cap);

        const bool boundary_hit = config.seek_mode == SeekMode::Within
                                      ? entropy < config.e_threshold
                                      : entropy > config.e_threshold;
        history.emplace_back(question, response);

        // candidates for the next round double as the Bellman lookahead set;
        // terminal steps bootstrap from an empty set (max reads 0)
        std::vector<Question> next_candidates;
        bool exhausted = false;
        std::string generator_error;
        if (!boundary_hit && step < config.max_steps) {
            try {
                next_candidates = ctx.generator.generate_candidates(
                    config.topic, next_belief, history, config.candidate_k, gen_rng);
            } catch (const GeneratorExhausted&) {
                exhausted = true;
            } catch (const Error& e) {
                exhausted = true;
                generator_error = e.what();
            }
        }
        std::vector<ActionId> next_ids;
        next_ids.reserve(next_candidates.size());
        for (const auto& q : next_candidates)
            next_ids.push_back(action_id_for(q, config.action_identity));

        InteractionRecord record;
        record.step = step;
        record.question = question;
        record.response_text = response.text;
        record.entropy = entropy;
        record.reward = step_reward;
        record.belief_prob = next_belief.probs.back();
        record.label = classify_boundary(entropy, config.encoder);
        {
            auto lock = maybe_lock(ctx.q_mutex);
            record.q_before = ctx.qtable.value(key, action);
            record.q_after = config.updates_enabled
                                 ? q_update(ctx.qtable, key, action, step_reward, next_key,
                                            next_ids, params)
                                 : record.q_before;
        }
        trace.records.push_back(std::move(record));
        trace.cumulative_reward += step_reward;

        if (boundary_hit) {
            trace.terminated_by = TerminationReason::Boundary;
            return trace;
        }
        if (!generator_error.empty()) {
            trace.terminated_by = TerminationReason::Error;
            trace.error = generator_error;
            return trace;
        }
        if (exhausted || step == config.max_steps) {
            trace.terminated_by = TerminationReason::MaxSteps;
            return trace;
        }

        belief = std::move(next_belief);
        prev_entropy = entropy;
        candidates = std::move(next_candidates);
    }
    trace.terminated_by = TerminationReason::MaxSteps;
    return trace;
}

namespace {

std::unique_ptr<Environment> build_environment(const RunConfig& config) {
    if (config.env_kind == EnvKind::Oracle) {
        OracleConfig oracle = config.oracle;
        if (oracle.seed == 0) oracle.seed = subseed(config.master_seed, "oracle");
        return std::make_unique<SimulatedOracle>(std::move(oracle));
    }
    return std::make_unique<HttpEndpoint>(config.endpoint);
}

std::unique_ptr<QuestionGenerator> build_generator(const RunConfig& config,
                                                   Environment& env) {
    switch (config.generator_kind) {
        case GeneratorKind::Template:
            return std::make_unique<TemplateGenerator>(config.topic, config.template_pool);
        case GeneratorKind::SeedFile:
            return std::make_unique<SeedPoolGenerator>(config.question_file, config.topic);
        case GeneratorKind::Script:
            return std::make_unique<ScriptedGenerator>(config.question_file, config.topic);
        case GeneratorKind::Llm: {
            auto* transport = dynamic_cast<ChatTransport*>(&env);
            if (!transport) {
                throw ConfigError(
                    "generator.kind=llm needs the endpoint environment as its transport");
            }
            return std::make_unique<LlmGenerator>(*transport, config.endpoint.model);
        }
    }
    throw ConfigError("unknown generator kind");
}

void accumulate(TrainingResult& result, EpisodeTrace&& trace, int max_steps) {
    result.rewards.push_back(trace.cumulative_reward);
    if (!trace.records.empty()) {
        std::vector<double> row;
        row.reserve(max_steps);
        for (const auto& rec : trace.records) row.push_back(rec.entropy);
        // an episode that converged keeps its final entropy for the remaining
        // rounds
        row.resize(max_steps, row.back());
        result.entropy_by_round.push_back(std::move(row));
    }
    for (const auto& rec : trace.records) {
        DatasetEntry entry{rec.question.text, rec.entropy, rec.question.topic, trace.episode,
                           rec.step};
        switch (rec.label) {
            case BoundaryLabel::Within: result.dataset.within.push_back(std::move(entry)); break;
            case BoundaryLabel::Beyond: result.dataset.beyond.push_back(std::move(entry)); break;
            case BoundaryLabel::Transition:
                result.dataset.transition.push_back(std::move(entry));
                break;
        }
    }
    result.episodes.push_back(std::move(trace));
}

}  // namespace

TrainingResult run_training(const RunConfig& config) {
    config.validate();

    TrainingResult result;
    if (!config.resume_qtable.empty()) result.qtable = QTable::load(config.resume_qtable);

    auto env = build_environment(config);
    auto generator = build_generator(config, *env);

    const std::uint64_t agent_seed =
        mix_seed(subseed(config.master_seed, "agent"), config.agent.rng_seed);
    const std::uint64_t generator_seed = subseed(config.master_seed, "generator");

    if (config.parallel <= 1) {
        int consecutive_errors = 0;
        for (int episode = 0; episode < config.n_episodes; ++episode) {
            EpisodeContext ctx{*env, *generator, result.qtable, episode, agent_seed,
                               generator_seed, nullptr};
            EpisodeTrace trace = run_episode(ctx, config);
            const bool errored = trace.terminated_by == TerminationReason::Error;
            const std::string error = trace.error;
            accumulate(result, std::move(trace), config.max_steps);
            consecutive_errors = errored ? consecutive_errors + 1 : 0;
            if (consecutive_errors >= config.abort_after_consecutive_errors) {
                result.aborted = true;
                result.abort_reason = std::to_string(consecutive_errors) +
                                      " consecutive error episodes; last: " + error;
                break;
            }
        }
        return result;
    }

    // Parallel mode: episodes claim indexes from a shared counter, Q-table
    // access is serialized, results land in completion order. Byte-level
    // determinism is only guaranteed sequentially.
    std::mutex q_mutex;
    std::mutex result_mutex;
    std::atomic<int> next_episode{0};
    std::atomic<int> consecutive_errors{0};
    std::atomic<bool> stop{false};

    auto worker = [&]() {
        while (!stop.load()) {
            const int episode = next_episode.fetch_add(1);
            if (episode >= config.n_episodes) return;
            EpisodeContext ctx{*env, *generator, result.qtable, episode, agent_seed,
                               generator_seed, &q_mutex};
            EpisodeTrace trace = run_episode(ctx, config);
            std::lock_guard<std::mutex> lock(result_mutex);
            if (trace.terminated_by == TerminationReason::Error) {
                if (consecutive_errors.fetch_add(1) + 1 >=
                    config.abort_after_consecutive_errors) {
                    result.aborted = true;
                    result.abort_reason = "consecutive error episodes; last: " + trace.error;
                    stop.store(true);
                }
            } else {
                consecutive_errors.store(0);
            }
            accumulate(result, std::move(trace), config.max_steps);
        }
    };

    std::vector<std::thread> threads;
    threads.reserve(config.parallel);
    for (int i = 0; i < config.parallel; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    return result;
}

void export_dataset(const BoundaryDataset& dataset, const std::string& path) {
    struct Row {
        const DatasetEntry* entry;
        const char* label;
    };
    std::vector<Row> rows;
    rows.reserve(dataset.size());
    for (const auto& e : dataset.within) rows.push_back({&e, "within"});
    for (const auto& e : dataset.beyond) rows.push_back({&e, "beyond"});
    for (const auto& e : dataset.transition) rows.push_back({&e, "transition"});
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        return std::tie(a.entry->episode, a.entry->step) <
               std::tie(b.entry->episode, b.entry->step);
    });

    std::ofstream out(path);
    if (!out) throw IoFailure("cannot open " + path + " for writing");
    char number[64];
    for (const auto& row : rows) {
        std::snprintf(number, sizeof(number), "%.6f", row.entry->entropy);
        out << "{\"text\":" << json_text(row.entry->text) << ",\"entropy\":" << number
            << ",\"label\":\"" << row.label << "\",\"topic\":" << json_text(row.entry->topic)
            << ",\"episode\":" << row.entry->episode << ",\"step\":" << row.entry->step << "}\n";
    }
    if (!out.good()) throw IoFailure("short write to " + path);
}

BoundaryDataset import_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open " + path);
    BoundaryDataset dataset;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw IoFailure(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        DatasetEntry entry{record.value("text", ""), record.value("entropy", 0.0),
                           record.value("topic", ""), record.value("episode", 0),
                           record.value("step", 0)};
        switch (label_from_string(record.value("label", ""))) {
            case BoundaryLabel::Within: dataset.within.push_back(std::move(entry)); break;
            case BoundaryLabel::Beyond: dataset.beyond.push_back(std::move(entry)); break;
            case BoundaryLabel::Transition: dataset.transition.push_back(std::move(entry)); break;
        }
    }
    return dataset;
}

void export_curves(const std::vector<double>& rewards,
                   const std::vector<std::vector<double>>& entropy_by_round,
                   const std::string& rewards_path, const std::string& entropy_path) {
    {
        std::ofstream out(rewards_path);
        if (!out) throw IoFailure("cannot open " + rewards_path + " for writing");
        out << "episode,cumulative_reward\n";
        char line[64];
        for (std::size_t i = 0; i < rewards.size(); ++i) {
            std::snprintf(line, sizeof(line), "%zu,%.6f\n", i + 1, rewards[i]);
            out << line;
        }
        if (!out.good()) throw IoFailure("short write to " + rewards_path);
    }

    std::ofstream out(entropy_path);
    if (!out) throw IoFailure("cannot open " + entropy_path + " for writing");
    out << "round,mean_entropy,std_entropy\n";
    if (entropy_by_round.empty()) return;
    const std::size_t rounds = entropy_by_round.front().size();
    const double n = static_cast<double>(entropy_by_round.size());
    char line[96];
    for (std::size_t r = 0; r < rounds; ++r) {
        double mean = 0.0;
        for (const auto& row : entropy_by_round) mean += row[r];
        mean /= n;
        double var = 0.0;
        for (const auto& row : entropy_by_round) var += (row[r] - mean) * (row[r] - mean);
        var /= n;  // population: a single episode reads std 0
        std::snprintf(line, sizeof(line), "%zu,%.6f,%.6f\n", r + 1, mean, std::sqrt(var));
        out << line;
    }
    if (!out.good()) throw IoFailure("short write to " + entropy_path);
}

void export_trace(const std::vector<EpisodeTrace>& episodes, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoFailure("cannot open " + path + " for writing");
    char numbers[256];
    for (const auto& episode : episodes) {
        for (const auto& rec : episode.records) {
            std::snprintf(numbers, sizeof(numbers),
                          ",\"entropy\":%.6f,\"reward\":%.6f,\"belief_prob\":%.6f,\"label\":\"%s\""
                          ",\"q_before\":%.6f,\"q_after\":%.6f}",
                          rec.entropy, rec.reward, rec.belief_prob, to_string(rec.label),
                          rec.q_before, rec.q_after);
            out << "{\"episode\":" << episode.episode << ",\"step\":" << rec.step
                << ",\"question_id\":\"" << rec.question.id
                << "\",\"topic\":" << json_text(rec.question.topic)
                << ",\"question\":" << json_text(rec.question.text)
                << ",\"response\":" << json_text(rec.response_text) << numbers << "\n";
        }
    }
    if (!out.good()) throw IoFailure("short write to " + path);
}

}  // namespace kbd
