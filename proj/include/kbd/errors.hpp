#pragma once

#include <stdexcept>
#include <string>

namespace kbd {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// ---- entropy ----
struct EmptyDistribution : Error {
    EmptyDistribution() : Error("token distribution has no entries") {}
};
struct InvalidLogprob : Error {
    explicit InvalidLogprob(double lp)
        : Error("logprob must be <= 0, got " + std::to_string(lp)) {}
};
struct EmptyResponse : Error {
    EmptyResponse() : Error("response carries no token distributions") {}
};

// ---- agent ----
struct EmptyActionSet : Error {
    EmptyActionSet() : Error("no candidate actions to select from") {}
};

// ---- environment ----
struct EndpointUnavailable : Error {
    explicit EndpointUnavailable(const std::string& detail)
        : Error("endpoint unavailable: " + detail) {}
};
struct MissingLogprobs : Error {
    explicit MissingLogprobs(const std::string& detail)
        : Error("response carries no usable logprobs: " + detail) {}
};
struct MalformedPayload : Error {
    explicit MalformedPayload(const std::string& detail)
        : Error("malformed completion payload: " + detail) {}
};
struct GeneratorExhausted : Error {
    explicit GeneratorExhausted(const std::string& detail)
        : Error("question generator exhausted: " + detail) {}
};

// ---- eval ----
struct DegenerateLabels : Error {
    DegenerateLabels() : Error("metric needs both label classes present") {}
    explicit DegenerateLabels(const std::string& detail) : Error(detail) {}
};
struct EmbedderUnavailable : Error {
    explicit EmbedderUnavailable(const std::string& detail)
        : Error("embedder unavailable: " + detail) {}
};

// ---- io / config ----
struct IoFailure : Error {
    explicit IoFailure(const std::string& detail) : Error("i/o failure: " + detail) {}
};
struct ConfigError : Error {
    explicit ConfigError(const std::string& detail) : Error(detail) {}
};

}  // namespace kbd
