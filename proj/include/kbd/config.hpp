#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kbd/eval.hpp"
#include "kbd/runner.hpp"

namespace kbd {

// Ordered key=value pairs; later entries win when a key repeats.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

// Flat key-value file with optional [section] headers: a line `alpha = 0.1`
// under `[agent]` yields the dotted key "agent.alpha". Blank lines and
// #/; comments are ignored. Throws IoFailure (missing file) or ConfigError
// (malformed line, with file:line).
KeyValues parse_config_file(const std::string& path);

// Splits a --set argument of the form key=value.
std::pair<std::string, std::string> split_override(const std::string& spec);

// Everything a command needs, resolved from defaults < config file < --set
// overrides < --seed.
struct Settings {
    RunConfig run;
    EvalOptions eval;
    std::string eval_input;            // labeled dataset for `evaluate`
    std::string phrase_file;           // uncertainty references for Similarity
    double histogram_bin_width = 10.0; // nats per entropy-histogram bin
    int sim_questions = 200;           // probes per `simulate`
    std::string export_run;            // run directory consumed by `export`
};

// Applies file values then overrides then the seed override, in order.
// Unknown keys are rejected by name; malformed values name the key. When no
// oracle.known_topics key is given and the environment is the oracle, the
// first three subtopics of run.topic default to known profiles so the
// landscape is bimodal out of the box.
Settings build_settings(const KeyValues& file_values, const KeyValues& overrides,
                        std::optional<std::uint64_t> seed_override);

}  // namespace kbd
