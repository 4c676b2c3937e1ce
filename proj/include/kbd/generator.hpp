#pragma once

#include <string>
#include <vector>

#include "kbd/environment.hpp"

namespace kbd {

struct TemplateGeneratorConfig {
    int subtopics = 24;
    int questions_per_subtopic = 40;
    // Per step the generator proposes (k - globals_per_step) follow-ups from
    // the current subtopic (spilling to ring neighbours once it runs dry) and
    // globals_per_step pool-wide draws. The pool-wide draw is what can jump
    // the conversation to a completely different area.
    int globals_per_step = 1;

    void validate() const;
};

// Deterministic subtopic labels for a run topic ("physics-fundamentals",
// "physics-methods", ...). The first labels are the elementary facets a
// default oracle marks as known.
std::vector<std::string> subtopic_labels(const std::string& topic, int count);

// Offline question source: a fixed pool of templated questions spanning the
// topic's subtopics. Candidate sets follow the conversation topically, which
// is what confines undirected questioning to its current entropy regime.
class TemplateGenerator : public QuestionGenerator {
public:
    TemplateGenerator(std::string topic, TemplateGeneratorConfig config = {});

    std::vector<Question> generate_candidates(const std::string& topic, const BeliefState& belief,
                                              const History& history, int k, Rng& rng) override;

    const std::vector<Question>& pool() const { return pool_; }

private:
    std::string topic_;
    TemplateGeneratorConfig config_;
    std::vector<Question> pool_;
    std::vector<std::vector<std::size_t>> by_subtopic_;  // indexes into pool_
    std::vector<std::string> labels_;
};

// Pool loaded from a plain text file: one question per line, optional
// tab-separated topic column. Draws k distinct unseen questions uniformly.
class SeedPoolGenerator : public QuestionGenerator {
public:
    SeedPoolGenerator(const std::string& path, std::string default_topic);

    std::vector<Question> generate_candidates(const std::string& topic, const BeliefState& belief,
                                              const History& history, int k, Rng& rng) override;

    const std::vector<Question>& pool() const { return pool_; }

private:
    std::vector<Question> pool_;
};

// Replays an ordered question file; the next question is dictated by how many
// have been asked so far. Throws GeneratorExhausted past the end of the
// script.
class ScriptedGenerator : public QuestionGenerator {
public:
    ScriptedGenerator(const std::string& path, std::string default_topic);

    std::vector<Question> generate_candidates(const std::string& topic, const BeliefState& belief,
                                              const History& history, int k, Rng& rng) override;

    std::size_t script_length() const { return script_.size(); }

private:
    std::vector<Question> script_;
};

// Transport used by the chat-model-backed generator (and implemented by the
// HTTP endpoint). Takes a serialized chat-completions request, returns the
// raw response body.
class ChatTransport {
public:
    virtual ~ChatTransport() = default;
    virtual std::string complete(const std::string& request_body) = 0;
};

// Asks a chat model for k fresh questions about the topic, one per line.
class LlmGenerator : public QuestionGenerator {
public:
    LlmGenerator(ChatTransport& transport, std::string model);

    std::vector<Question> generate_candidates(const std::string& topic, const BeliefState& belief,
                                              const History& history, int k, Rng& rng) override;

private:
    ChatTransport& transport_;
    std::string model_;
};

// Splits a chat completion's content into candidate questions (one per line,
// blank lines and list markers stripped). Exposed for tests.
std::vector<std::string> parse_question_lines(const std::string& content);

}  // namespace kbd
