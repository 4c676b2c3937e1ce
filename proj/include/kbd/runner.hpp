#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "kbd/agent.hpp"
#include "kbd/environment.hpp"
#include "kbd/generator.hpp"

namespace kbd {

enum class SeekMode { Within, Beyond };
enum class EnvKind { Oracle, Endpoint };
enum class GeneratorKind { Template, SeedFile, Script, Llm };
enum class ActionIdentity { Topic, Text };
enum class RewardMode { Delta, Raw };
enum class TerminationReason { Boundary, MaxSteps, Error };

const char* to_string(SeekMode mode);
const char* to_string(TerminationReason reason);

struct RunConfig {
    int n_episodes = 300;
    int max_steps = 50;
    double e_threshold = 40.0;  // Within: stop when E < threshold; Beyond: E > threshold
    std::string topic = "science";
    SeekMode seek_mode = SeekMode::Within;
    int candidate_k = 8;
    int bins = kDefaultMeanBins;
    int step_cap = kDefaultStepCap;

    AgentParams agent;
    BeliefEncoderParams encoder;

    EnvKind env_kind = EnvKind::Oracle;
    OracleConfig oracle;
    EndpointConfig endpoint;

    GeneratorKind generator_kind = GeneratorKind::Template;
    TemplateGeneratorConfig template_pool;
    std::string question_file;  // SeedFile / Script generators

    // Q-values generalize across questions at this granularity.
    ActionIdentity action_identity = ActionIdentity::Topic;
    RewardMode reward_mode = RewardMode::Delta;
    bool updates_enabled = true;
    // First question of an episode is a uniform draw, so episodes may open on
    // either side of the boundary.
    bool random_first_question = true;

    int abort_after_consecutive_errors = 5;
    std::string resume_qtable;  // optional snapshot to warm-start from
    int parallel = 0;           // worker threads; 0 = sequential (deterministic)
    std::uint64_t master_seed = 7;

    void validate() const;  // throws ConfigError naming the offending field
};

struct InteractionRecord {
    int step = 0;  // 1-based round index
    Question question;
    std::string response_text;
    double entropy = 0.0;
    double reward = 0.0;
    double belief_prob = 0.0;
    BoundaryLabel label = BoundaryLabel::Transition;
    double q_before = 0.0;
    double q_after = 0.0;
};

struct EpisodeTrace {
    int episode = 0;
    std::vector<InteractionRecord> records;
    TerminationReason terminated_by = TerminationReason::MaxSteps;
    double cumulative_reward = 0.0;
    std::string error;  // populated when terminated_by == Error
};

struct DatasetEntry {
    std::string text;
    double entropy = 0.0;
    std::string topic;
    int episode = 0;
    int step = 0;
};

struct BoundaryDataset {
    std::vector<DatasetEntry> within;
    std::vector<DatasetEntry> beyond;
    std::vector<DatasetEntry> transition;

    std::size_t size() const { return within.size() + beyond.size() + transition.size(); }
};

// Everything one episode needs. q_mutex is only set in parallel runs.
struct EpisodeContext {
    Environment& env;
    QuestionGenerator& generator;
    QTable& qtable;
    int episode_index = 0;
    std::uint64_t agent_seed = 0;
    std::uint64_t generator_seed = 0;
    std::mutex* q_mutex = nullptr;
};

EpisodeTrace run_episode(EpisodeContext& ctx, const RunConfig& config);

struct TrainingResult {
    std::vector<EpisodeTrace> episodes;
    BoundaryDataset dataset;
    std::vector<double> rewards;  // per episode, completion order
    // rows: episodes that produced at least one record; columns: rounds
    // 1..max_steps, padded by carrying the final entropy forward
    std::vector<std::vector<double>> entropy_by_round;
    QTable qtable;
    bool aborted = false;  // true when consecutive Error episodes hit the cap
    std::string abort_reason;
};

TrainingResult run_training(const RunConfig& config);

// Line-delimited records (text, entropy, label, topic, episode, step) in
// (episode, step) order. Throws IoFailure.
void export_dataset(const BoundaryDataset& dataset, const std::string& path);
BoundaryDataset import_dataset(const std::string& path);

// rewards.csv: (episode, cumulative_reward); entropy_rounds.csv: (round,
// mean_entropy, std_entropy) with population std over episodes.
void export_curves(const std::vector<double>& rewards,
                   const std::vector<std::vector<double>>& entropy_by_round,
                   const std::string& rewards_path, const std::string& entropy_path);

// Audit trail: one line-delimited record per interaction.
void export_trace(const std::vector<EpisodeTrace>& episodes, const std::string& path);

ActionId action_id_for(const Question& question, ActionIdentity identity);

}  // namespace kbd
