#include "kbd/generator.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "kbd/errors.hpp"

namespace kbd {

namespace {

// Facet vocabulary for subtopic labels. Order matters: the leading facets are
// the elementary ones a default oracle treats as known territory.
const char* kFacets[] = {
    "fundamentals", "definitions",   "history",     "classification", "terminology",
    "principles",   "methods",       "instruments", "measurement",    "materials",
    "processes",    "applications",  "engineering", "economics",      "policy",
    "ethics",       "education",     "communication", "computation",  "modeling",
    "forecasting",  "frontiers",     "philosophy",  "controversies",
};
constexpr int kFacetCount = static_cast<int>(sizeof(kFacets) / sizeof(kFacets[0]));

const char* kTemplates[] = {
    "What is the role of %s in %s?",
    "How does %s shape %s?",
    "Why does %s matter for %s?",
    "What limits does %s impose on %s?",
    "How is %s measured within %s?",
    "What happens to %s under extreme conditions in %s?",
    "How did the understanding of %s evolve in %s?",
    "What open problems involve %s in %s?",
    "How does %s compare across approaches to %s?",
    "What common misconceptions surround %s in %s?",
};
constexpr int kTemplateCount = static_cast<int>(sizeof(kTemplates) / sizeof(kTemplates[0]));

const char* kDetails[] = {"scale", "structure", "change", "interaction"};
constexpr int kDetailCount = static_cast<int>(sizeof(kDetails) / sizeof(kDetails[0]));

std::string detail_word(int index) {
    if (index < kDetailCount) return kDetails[index];
    return "aspect " + std::to_string(index + 1);
}

// First m elements of a partial Fisher-Yates shuffle over `indexes`.
std::vector<std::size_t> draw_without_replacement(std::vector<std::size_t> indexes, std::size_t m,
                                                  Rng& rng) {
    m = std::min(m, indexes.size());
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j = i + rng.index(indexes.size() - i);
        std::swap(indexes[i], indexes[j]);
    }
    indexes.resize(m);
    return indexes;
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::vector<Question> load_question_file(const std::string& path, const std::string& default_topic,
                                         QuestionOrigin origin) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open question file " + path);
    std::vector<Question> questions;
    std::string line;
    while (std::getline(in, line)) {
        std::string text = trim(line);
        if (text.empty() || text[0] == '#') continue;
        std::string topic = default_topic;
        if (const auto tab = text.find('\t'); tab != std::string::npos) {
            topic = trim(text.substr(tab + 1));
            text = trim(text.substr(0, tab));
            if (topic.empty()) topic = default_topic;
        }
        questions.push_back({question_id(topic, text), text, topic, origin});
    }
    return questions;
}

}  // namespace

std::string question_id(const std::string& topic, const std::string& text) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(topic + "\t" + text)));
    return buf;
}

void TemplateGeneratorConfig::validate() const {
    if (subtopics < 1) throw ConfigError("generator.subtopics must be >= 1");
    if (questions_per_subtopic < 1)
        throw ConfigError("generator.questions_per_subtopic must be >= 1");
    if (globals_per_step < 0) throw ConfigError("generator.globals_per_step must be >= 0");
}

std::vector<std::string> subtopic_labels(const std::string& topic, int count) {
    std::vector<std::string> labels;
    labels.reserve(count);
    for (int i = 0; i < count; ++i) {
        if (i < kFacetCount) {
            labels.push_back(topic + "-" + kFacets[i]);
        } else {
            char suffix[16];
            std::snprintf(suffix, sizeof(suffix), "-area%02d", i);
            labels.push_back(topic + suffix);
        }
    }
    return labels;
}

TemplateGenerator::TemplateGenerator(std::string topic, TemplateGeneratorConfig config)
    : topic_(std::move(topic)), config_(config) {
    config_.validate();
    labels_ = subtopic_labels(topic_, config_.subtopics);
    by_subtopic_.resize(labels_.size());
    char text[256];
    for (std::size_t s = 0; s < labels_.size(); ++s) {
        for (int j = 0; j < config_.questions_per_subtopic; ++j) {
            const std::string detail = detail_word(j / kTemplateCount);
            std::snprintf(text, sizeof(text), kTemplates[j % kTemplateCount], detail.c_str(),
                          labels_[s].c_str());
            by_subtopic_[s].push_back(pool_.size());
            pool_.push_back({question_id(labels_[s], text), text, labels_[s],
                             QuestionOrigin::Generated});
        }
    }
}

std::vector<Question> TemplateGenerator::generate_candidates(const std::string&,
                                                             const BeliefState&,
                                                             const History& history, int k,
                                                             Rng& rng) {
    std::unordered_set<std::string> seen;
    seen.reserve(history.size());
    for (const auto& [q, r] : history) seen.insert(q.text);

    std::vector<std::size_t> unseen;
    unseen.reserve(pool_.size());
    for (std::size_t i = 0; i < pool_.size(); ++i) {
        if (!seen.count(pool_[i].text)) unseen.push_back(i);
    }
    if (unseen.size() < static_cast<std::size_t>(k)) {
        throw GeneratorExhausted("pool has " + std::to_string(unseen.size()) +
                                 " unseen questions, need " + std::to_string(k));
    }

    // Locate the subtopic of the last asked question to stay topically close.
    int current = -1;
    if (!history.empty()) {
        const std::string& last_topic = history.back().first.topic;
        for (std::size_t s = 0; s < labels_.size(); ++s) {
            if (labels_[s] == last_topic) {
                current = static_cast<int>(s);
                break;
            }
        }
    }

    std::vector<std::size_t> chosen;
    std::unordered_set<std::size_t> taken;
    const int n = static_cast<int>(labels_.size());

    if (current >= 0) {
        const int globals = std::min(config_.globals_per_step, k);
        const std::size_t locals_needed = static_cast<std::size_t>(k - globals);
        // walk the subtopic ring outwards: S, S+1, S-1, S+2, S-2, ...
        for (int distance = 0; chosen.size() < locals_needed && distance <= n / 2; ++distance) {
            for (int sign : {+1, -1}) {
                if (distance == 0 && sign < 0) continue;
                const int s = ((current + sign * distance) % n + n) % n;
                std::vector<std::size_t> level;
                for (std::size_t idx : by_subtopic_[s]) {
                    if (!seen.count(pool_[idx].text) && !taken.count(idx)) level.push_back(idx);
                }
                const std::size_t want = locals_needed - chosen.size();
                for (std::size_t idx : draw_without_replacement(std::move(level), want, rng)) {
                    chosen.push_back(idx);
                    taken.insert(idx);
                }
                if (chosen.size() >= locals_needed) break;
            }
        }
    }

    // pool-wide draws (the whole set when there is no history yet)
    std::vector<std::size_t> rest;
    rest.reserve(unseen.size());
    for (std::size_t idx : unseen) {
        if (!taken.count(idx)) rest.push_back(idx);
    }
    const std::size_t want = static_cast<std::size_t>(k) - chosen.size();
    for (std::size_t idx : draw_without_replacement(std::move(rest), want, rng)) {
        chosen.push_back(idx);
    }

    // shuffle so list position carries no information about provenance
    for (std::size_t i = 0; i + 1 < chosen.size(); ++i) {
        std::swap(chosen[i], chosen[i + rng.index(chosen.size() - i)]);
    }

    std::vector<Question> out;
    out.reserve(chosen.size());
    for (std::size_t idx : chosen) out.push_back(pool_[idx]);
    return out;
}

SeedPoolGenerator::SeedPoolGenerator(const std::string& path, std::string default_topic)
    : pool_(load_question_file(path, default_topic, QuestionOrigin::Seed)) {
    if (pool_.empty()) throw ConfigError("seed question file " + path + " has no questions");
}

std::vector<Question> SeedPoolGenerator::generate_candidates(const std::string&,
                                                             const BeliefState&,
                                                             const History& history, int k,
                                                             Rng& rng) {
    std::unordered_set<std::string> seen;
    for (const auto& [q, r] : history) seen.insert(q.text);
    std::vector<std::size_t> unseen;
    for (std::size_t i = 0; i < pool_.size(); ++i) {
        if (!seen.count(pool_[i].text)) unseen.push_back(i);
    }
    if (unseen.size() < static_cast<std::size_t>(k)) {
        throw GeneratorExhausted("seed pool has " + std::to_string(unseen.size()) +
                                 " unseen questions, need " + std::to_string(k));
    }
    std::vector<Question> out;
    for (std::size_t idx : draw_without_replacement(std::move(unseen), k, rng)) {
        out.push_back(pool_[idx]);
    }
    return out;
}

ScriptedGenerator::ScriptedGenerator(const std::string& path, std::string default_topic)
    : script_(load_question_file(path, default_topic, QuestionOrigin::Seed)) {
    if (script_.empty()) throw ConfigError("expert script " + path + " has no questions");
}

std::vector<Question> ScriptedGenerator::generate_candidates(const std::string&,
                                                             const BeliefState&,
                                                             const History& history, int,
                                                             Rng&) {
    if (history.size() >= script_.size()) {
        throw GeneratorExhausted("script of " + std::to_string(script_.size()) +
                                 " questions fully replayed");
    }
    return {script_[history.size()]};
}

LlmGenerator::LlmGenerator(ChatTransport& transport, std::string model)
    : transport_(transport), model_(std::move(model)) {}

std::vector<std::string> parse_question_lines(const std::string& content) {
    std::vector<std::string> questions;
    std::istringstream stream(content);
    std::string line;
    while (std::getline(stream, line)) {
        std::string text = trim(line);
        // strip "1.", "-", "*" list markers
        if (!text.empty() && (text[0] == '-' || text[0] == '*')) text = trim(text.substr(1));
        std::size_t digits = 0;
        while (digits < text.size() && std::isdigit(static_cast<unsigned char>(text[digits])))
            ++digits;
        if (digits > 0 && digits < text.size() && (text[digits] == '.' || text[digits] == ')')) {
            text = trim(text.substr(digits + 1));
        }
        if (!text.empty()) questions.push_back(text);
    }
    return questions;
}

std::vector<Question> LlmGenerator::generate_candidates(const std::string& topic,
                                                        const BeliefState&,
                                                        const History& history, int k, Rng&) {
    nlohmann::json messages = nlohmann::json::array();
    messages.push_back(
        {{"role", "system"},
         {"content", "You propose probing questions to map what another model knows. "
                     "Reply with exactly the requested number of questions, one per line, "
                     "no numbering."}});
    std::string prompt = "Topic: " + topic + "\nPropose " + std::to_string(k) +
                         " new questions about this topic.";
    if (!history.empty()) {
        prompt += "\nAlready asked:\n";
        for (const auto& [q, r] : history) prompt += "- " + q.text + "\n";
        prompt += "Do not repeat any of them.";
    }
    messages.push_back({{"role", "user"}, {"content", prompt}});

    const nlohmann::json request = {{"model", model_}, {"messages", messages}};
    const std::string body = transport_.complete(request.dump());

    nlohmann::json payload;
    try {
        payload = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw MalformedPayload(e.what());
    }
    if (!payload.contains("choices") || payload["choices"].empty() ||
        !payload["choices"][0].contains("message")) {
        throw MalformedPayload("no choices[0].message in generator completion");
    }
    const std::string content = payload["choices"][0]["message"].value("content", "");

    std::unordered_set<std::string> seen;
    for (const auto& [q, r] : history) seen.insert(q.text);
    std::vector<Question> out;
    std::unordered_set<std::string> texts;
    for (const std::string& text : parse_question_lines(content)) {
        if (seen.count(text) || texts.count(text)) continue;
        texts.insert(text);
        out.push_back({question_id(topic, text), text, topic, QuestionOrigin::Generated});
        if (out.size() == static_cast<std::size_t>(k)) break;
    }
    if (out.size() < static_cast<std::size_t>(k)) {
        throw GeneratorExhausted("model returned " + std::to_string(out.size()) + " of " +
                                 std::to_string(k) + " usable questions");
    }
    return out;
}

}  // namespace kbd
