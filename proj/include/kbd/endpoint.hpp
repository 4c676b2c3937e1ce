#pragma once

#include <string>

#include "kbd/environment.hpp"
#include "kbd/generator.hpp"

namespace kbd {

// Extracts text + per-position token distributions from a chat-completions
// response body. Each position's top-k alternatives are renormalized to unit
// mass (so entropies are lower bounds over the visible slice) and the sampled
// token is moved to the front of its distribution. Throws MalformedPayload on
// unparseable bodies and MissingLogprobs when the payload carries no logprob
// block.
Response parse_logprob_payload(const std::string& body);

// Inverse of parse_logprob_payload for tests and recording: renders a
// Response back into a chat-completions payload carrying the (renormalized)
// logprobs.
std::string serialize_logprob_payload(const Response& response, const std::string& model);

// Chat-completions client against an OpenAI-style HTTP server. The bearer
// token is read from the environment variable named in the config at call
// time; requests that fail transport-wise (connect errors, 429, 5xx) are
// retried max_retries times with exponential backoff before
// EndpointUnavailable is thrown.
class HttpEndpoint : public Environment, public ChatTransport {
public:
    explicit HttpEndpoint(EndpointConfig config);

    Response ask(const Question& question, const History& history) override;
    std::string complete(const std::string& request_body) override;

    const EndpointConfig& config() const { return config_; }

private:
    EndpointConfig config_;
    std::string host_;  // scheme://host[:port]
    std::string path_prefix_;
};

}  // namespace kbd
