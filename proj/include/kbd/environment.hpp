#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "kbd/agent.hpp"
#include "kbd/entropy.hpp"
#include "kbd/rng.hpp"

namespace kbd {

enum class QuestionOrigin { Generated, Seed, Random };

struct Question {
    std::string id;     // stable within a run; derived from topic + text
    std::string text;
    std::string topic;
    QuestionOrigin origin = QuestionOrigin::Generated;
};

// Builds the canonical question id (hex of a stable hash over topic + text).
std::string question_id(const std::string& topic, const std::string& text);

struct Response {
    std::string text;
    // One distribution per generated position; entries[0] of each is the
    // token that was actually emitted.
    std::vector<TokenDistribution> token_dists;
    EntropyScore entropy;  // always response_entropy(token_dists)
    std::uint64_t latency_ms = 0;
};

using Interaction = std::pair<Question, Response>;
using History = std::vector<Interaction>;

// A target model the agent can question. Sessions are episode-scoped: one
// episode owns its environment session exclusively.
class Environment {
public:
    virtual ~Environment() = default;
    virtual Response ask(const Question& question, const History& history) = 0;
};

// Proposes the per-step candidate question pool. Implementations draw from a
// template pool, a seed file, a fixed script, or a chat model.
class QuestionGenerator {
public:
    virtual ~QuestionGenerator() = default;
    virtual std::vector<Question> generate_candidates(const std::string& topic,
                                                      const BeliefState& belief,
                                                      const History& history, int k,
                                                      Rng& rng) = 0;
};

struct TopicProfile {
    double mean = 0.0;
    double std = 0.0;
};

struct OracleConfig {
    std::map<std::string, TopicProfile> known_topics;
    TopicProfile unknown_entropy{200.0, 2.0};
    double transition_fraction = 0.0;  // in [0, 1]
    std::uint64_t seed = 0;  // 0 = derive from the run's master seed

    // known means must sit below lower-2*std, the unknown mean above
    // upper+2*std, so the landscape is genuinely bimodal. Throws ConfigError.
    void validate() const;
};

struct EndpointConfig {
    std::string base_url = "http://localhost:8080";
    std::string model = "default-model";
    std::string api_key_env = "KBD_API_KEY";  // env var holding the bearer token
    int top_logprobs = 8;
    int timeout_ms = 30000;
    int max_retries = 3;
    int backoff_initial_ms = 500;  // doubles per retry

    void validate() const;
};

}  // namespace kbd
