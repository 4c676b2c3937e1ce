#include "kbd/config.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <fstream>

#include "kbd/errors.hpp"

namespace kbd {

namespace {

std::string trim(const std::string& s) {
    std::size_t begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    std::size_t end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::string to_lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* expected) {
    throw ConfigError(key + " expects " + expected + ", got '" + value + "'");
}

bool parse_bool(const std::string& key, const std::string& value) {
    const std::string v = to_lower(value);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    bad_value(key, value, "a boolean (true/false)");
}

int parse_int(const std::string& key, const std::string& value) {
    int out = 0;
    const char* begin = value.data();
    const char* end = begin + value.size();
    const auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc() || ptr != end || value.empty()) {
        bad_value(key, value, "an integer");
    }
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    std::uint64_t out = 0;
    const char* begin = value.data();
    const char* end = begin + value.size();
    const auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc() || ptr != end || value.empty()) {
        bad_value(key, value, "an unsigned integer");
    }
    return out;
}

double parse_real(const std::string& key, const std::string& value) {
    if (value.empty()) bad_value(key, value, "a number");
    errno = 0;
    char* end = nullptr;
    const double out = std::strtod(value.c_str(), &end);
    if (errno != 0 || end != value.c_str() + value.size()) {
        bad_value(key, value, "a number");
    }
    return out;
}

SeekMode parse_seek(const std::string& key, const std::string& value) {
    const std::string v = to_lower(value);
    if (v == "within") return SeekMode::Within;
    if (v == "beyond") return SeekMode::Beyond;
    bad_value(key, value, "within or beyond");
}

EnvKind parse_env(const std::string& key, const std::string& value) {
    const std::string v = to_lower(value);
    if (v == "oracle") return EnvKind::Oracle;
    if (v == "endpoint") return EnvKind::Endpoint;
    bad_value(key, value, "oracle or endpoint");
}

GeneratorKind parse_generator(const std::string& key, const std::string& value) {
    const std::string v = to_lower(value);
    if (v == "template") return GeneratorKind::Template;
    if (v == "seed-file") return GeneratorKind::SeedFile;
    if (v == "script") return GeneratorKind::Script;
    if (v == "llm") return GeneratorKind::Llm;
    bad_value(key, value, "template, seed-file, script, or llm");
}

ActionIdentity parse_identity(const std::string& key, const std::string& value) {
    const std::string v = to_lower(value);
    if (v == "topic") return ActionIdentity::Topic;
    if (v == "text") return ActionIdentity::Text;
    bad_value(key, value, "topic or text");
}

RewardMode parse_reward(const std::string& key, const std::string& value) {
    const std::string v = to_lower(value);
    if (v == "delta") return RewardMode::Delta;
    if (v == "raw") return RewardMode::Raw;
    bad_value(key, value, "delta or raw");
}

Estimator parse_estimator(const std::string& key, const std::string& value) {
    const std::string v = to_lower(value);
    if (v == "entropy") return Estimator::Entropy;
    if (v == "confidence") return Estimator::Confidence;
    if (v == "similarity") return Estimator::Similarity;
    bad_value(key, value, "entropy, confidence, or similarity");
}

// "label:mean:std,label:mean:std,..."; an empty value clears the map.
void parse_known_topics(const std::string& key, const std::string& value, OracleConfig& oracle) {
    oracle.known_topics.clear();
    const std::string body = trim(value);
    if (body.empty()) return;
    std::size_t start = 0;
    while (start <= body.size()) {
        std::size_t comma = body.find(',', start);
        if (comma == std::string::npos) comma = body.size();
        const std::string entry = trim(body.substr(start, comma - start));
        start = comma + 1;
        if (entry.empty()) continue;
        const std::size_t c1 = entry.find(':');
        const std::size_t c2 = c1 == std::string::npos ? std::string::npos
                                                       : entry.find(':', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos) {
            bad_value(key, entry, "entries of the form label:mean:std");
        }
        const std::string label = trim(entry.substr(0, c1));
        if (label.empty()) bad_value(key, entry, "entries of the form label:mean:std");
        TopicProfile profile;
        profile.mean = parse_real(key, trim(entry.substr(c1 + 1, c2 - c1 - 1)));
        profile.std = parse_real(key, trim(entry.substr(c2 + 1)));
        oracle.known_topics[label] = profile;
    }
}

struct Applier {
    Settings& s;
    bool known_topics_seen = false;

    void apply(const std::string& key, const std::string& value) {
        RunConfig& run = s.run;
        if (key == "run.topic") run.topic = value;
        else if (key == "run.n_episodes") run.n_episodes = parse_int(key, value);
        else if (key == "run.max_steps") run.max_steps = parse_int(key, value);
        else if (key == "run.e_threshold") run.e_threshold = parse_real(key, value);
        else if (key == "run.seek") run.seek_mode = parse_seek(key, value);
        else if (key == "run.candidate_k") run.candidate_k = parse_int(key, value);
        else if (key == "run.bins") run.bins = parse_int(key, value);
        else if (key == "run.step_cap") run.step_cap = parse_int(key, value);
        else if (key == "run.environment") run.env_kind = parse_env(key, value);
        else if (key == "run.generator") run.generator_kind = parse_generator(key, value);
        else if (key == "run.question_file") run.question_file = value;
        else if (key == "run.action_identity") run.action_identity = parse_identity(key, value);
        else if (key == "run.reward") run.reward_mode = parse_reward(key, value);
        else if (key == "run.updates_enabled") run.updates_enabled = parse_bool(key, value);
        else if (key == "run.random_first_question")
            run.random_first_question = parse_bool(key, value);
        else if (key == "run.abort_after_errors")
            run.abort_after_consecutive_errors = parse_int(key, value);
        else if (key == "run.resume_qtable") run.resume_qtable = value;
        else if (key == "run.parallel") run.parallel = parse_int(key, value);
        else if (key == "run.seed") run.master_seed = parse_u64(key, value);
        else if (key == "agent.alpha") run.agent.alpha = parse_real(key, value);
        else if (key == "agent.gamma") run.agent.gamma = parse_real(key, value);
        else if (key == "agent.epsilon") run.agent.epsilon = parse_real(key, value);
        else if (key == "agent.epsilon_decay") run.agent.epsilon_decay = parse_real(key, value);
        else if (key == "agent.seed") run.agent.rng_seed = parse_u64(key, value);
        else if (key == "encoder.beta") run.encoder.beta = parse_real(key, value);
        else if (key == "encoder.e_threshold") run.encoder.e_th = parse_real(key, value);
        else if (key == "encoder.lower") run.encoder.lower = parse_real(key, value);
        else if (key == "encoder.upper") run.encoder.upper = parse_real(key, value);
        else if (key == "oracle.seed") run.oracle.seed = parse_u64(key, value);
        else if (key == "oracle.transition_fraction")
            run.oracle.transition_fraction = parse_real(key, value);
        else if (key == "oracle.unknown_mean")
            run.oracle.unknown_entropy.mean = parse_real(key, value);
        else if (key == "oracle.unknown_std")
            run.oracle.unknown_entropy.std = parse_real(key, value);
        else if (key == "oracle.known_topics") {
            parse_known_topics(key, value, run.oracle);
            known_topics_seen = true;
        } else if (key == "endpoint.base_url") run.endpoint.base_url = value;
        else if (key == "endpoint.model") run.endpoint.model = value;
        else if (key == "endpoint.api_key_env") run.endpoint.api_key_env = value;
        else if (key == "endpoint.top_logprobs")
            run.endpoint.top_logprobs = parse_int(key, value);
        else if (key == "endpoint.timeout_ms") run.endpoint.timeout_ms = parse_int(key, value);
        else if (key == "endpoint.max_retries") run.endpoint.max_retries = parse_int(key, value);
        else if (key == "endpoint.backoff_ms")
            run.endpoint.backoff_initial_ms = parse_int(key, value);
        else if (key == "generator.subtopics")
            run.template_pool.subtopics = parse_int(key, value);
        else if (key == "generator.questions_per_subtopic")
            run.template_pool.questions_per_subtopic = parse_int(key, value);
        else if (key == "generator.globals_per_step")
            run.template_pool.globals_per_step = parse_int(key, value);
        else if (key == "eval.estimator") s.eval.estimator = parse_estimator(key, value);
        else if (key == "eval.threshold") s.eval.threshold = parse_real(key, value);
        else if (key == "eval.tau") s.eval.tau = parse_real(key, value);
        else if (key == "eval.input") s.eval_input = value;
        else if (key == "eval.phrases") s.phrase_file = value;
        else if (key == "export.bin_width") s.histogram_bin_width = parse_real(key, value);
        else if (key == "export.run") s.export_run = value;
        else if (key == "sim.questions") s.sim_questions = parse_int(key, value);
        else throw ConfigError("unknown config key: " + key);
    }
};

}  // namespace

KeyValues parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) throw IoFailure("cannot open config: " + path);

    KeyValues values;
    std::string line;
    std::string section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = path + ":" + std::to_string(lineno);
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw ConfigError(where + ": unterminated section header");
            section = trim(t.substr(1, t.size() - 2));
            if (section.empty()) throw ConfigError(where + ": empty section name");
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
        std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) throw ConfigError(where + ": empty key");
        if (!section.empty() && key.find('.') == std::string::npos) {
            key = section + "." + key;
        }
        values.emplace_back(std::move(key), value);
    }
    return values;
}

std::pair<std::string, std::string> split_override(const std::string& spec) {
    const std::size_t eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("--set expects key=value, got '" + spec + "'");
    }
    return {trim(spec.substr(0, eq)), trim(spec.substr(eq + 1))};
}

Settings build_settings(const KeyValues& file_values, const KeyValues& overrides,
                        std::optional<std::uint64_t> seed_override) {
    Settings settings;
    Applier applier{settings};
    for (const auto& [key, value] : file_values) applier.apply(key, value);
    for (const auto& [key, value] : overrides) applier.apply(key, value);
    if (seed_override) settings.run.master_seed = *seed_override;

    // Default landscape: the topic's first facets are known, the rest is not.
    if (!applier.known_topics_seen && settings.run.env_kind == EnvKind::Oracle) {
        const int count = std::min(3, settings.run.template_pool.subtopics);
        const auto labels = subtopic_labels(settings.run.topic, count);
        const double means[3] = {26.0, 28.0, 30.0};
        for (std::size_t i = 0; i < labels.size(); ++i) {
            settings.run.oracle.known_topics[labels[i]] = {means[i], 2.0};
        }
    }
    return settings;
}

}  // namespace kbd
