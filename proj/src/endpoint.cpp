#include "kbd/endpoint.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "kbd/errors.hpp"

namespace kbd {

namespace {

using nlohmann::json;

constexpr const char* kChatPath = "/v1/chat/completions";

TokenDistribution position_distribution(const json& position) {
    const std::string chosen_token = position.value("token", "");
    const double chosen_logprob = position.value("logprob", 0.0);

    TokenDistribution dist;
    dist.entries.push_back({chosen_token, std::min(0.0, chosen_logprob)});
    if (position.contains("top_logprobs")) {
        for (const auto& alt : position["top_logprobs"]) {
            const std::string token = alt.value("token", "");
            if (token == chosen_token) continue;  // already at the front
            dist.entries.push_back({token, std::min(0.0, alt.value("logprob", 0.0))});
        }
    }
    return renormalize(dist);
}

}  // namespace

void EndpointConfig::validate() const {
    if (base_url.empty()) throw ConfigError("endpoint.base_url must not be empty");
    if (model.empty()) throw ConfigError("endpoint.model must not be empty");
    if (top_logprobs < 1) throw ConfigError("endpoint.top_logprobs must be >= 1");
    if (timeout_ms < 1) throw ConfigError("endpoint.timeout_ms must be >= 1");
    if (max_retries < 0) throw ConfigError("endpoint.max_retries must be >= 0");
    if (backoff_initial_ms < 0) throw ConfigError("endpoint.backoff_initial_ms must be >= 0");
}

Response parse_logprob_payload(const std::string& body) {
    json payload;
    try {
        payload = json::parse(body);
    } catch (const json::exception& e) {
        throw MalformedPayload(e.what());
    }

    if (!payload.contains("choices") || !payload["choices"].is_array() ||
        payload["choices"].empty()) {
        throw MalformedPayload("payload has no choices");
    }
    const json& choice = payload["choices"][0];
    if (!choice.contains("message")) throw MalformedPayload("choice carries no message");

    Response response;
    response.text = choice["message"].value("content", "");

    if (!choice.contains("logprobs") || choice["logprobs"].is_null() ||
        !choice["logprobs"].contains("content") || !choice["logprobs"]["content"].is_array() ||
        choice["logprobs"]["content"].empty()) {
        throw MissingLogprobs("request must set logprobs=true with top_logprobs");
    }

    try {
        for (const auto& position : choice["logprobs"]["content"]) {
            response.token_dists.push_back(position_distribution(position));
        }
    } catch (const json::exception& e) {
        throw MalformedPayload(e.what());
    }
    response.entropy = response_entropy(response.token_dists);
    return response;
}

std::string serialize_logprob_payload(const Response& response, const std::string& model) {
    json content = json::array();
    for (const auto& dist : response.token_dists) {
        json alts = json::array();
        for (const auto& entry : dist.entries) {
            alts.push_back({{"token", entry.token}, {"logprob", entry.logprob}});
        }
        content.push_back({{"token", dist.entries.front().token},
                           {"logprob", dist.entries.front().logprob},
                           {"top_logprobs", std::move(alts)}});
    }
    const json payload = {
        {"object", "chat.completion"},
        {"model", model},
        {"choices",
         json::array({{{"index", 0},
                       {"message", {{"role", "assistant"}, {"content", response.text}}},
                       {"logprobs", {{"content", std::move(content)}}},
                       {"finish_reason", "stop"}}})},
    };
    return payload.dump();
}

HttpEndpoint::HttpEndpoint(EndpointConfig config) : config_(std::move(config)) {
    config_.validate();
    // split scheme://host[:port][/prefix] so a gateway prefix survives
    std::string url = config_.base_url;
    const auto scheme_end = url.find("://");
    const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start == std::string::npos) {
        host_ = url;
    } else {
        host_ = url.substr(0, path_start);
        path_prefix_ = url.substr(path_start);
        while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    }
}

std::string HttpEndpoint::complete(const std::string& request_body) {
    httplib::Client client(host_);
    client.set_connection_timeout(0, config_.timeout_ms * 1000);
    client.set_read_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);

    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    std::string last_error;
    int backoff_ms = config_.backoff_initial_ms;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
            backoff_ms *= 2;
        }
        auto result = client.Post(path_prefix_ + kChatPath, headers, request_body,
                                  "application/json");
        if (!result) {
            last_error = httplib::to_string(result.error());
            continue;
        }
        if (result->status == 429 || result->status >= 500) {
            last_error = "http status " + std::to_string(result->status);
            continue;
        }
        if (result->status != 200) {
            throw EndpointUnavailable("http status " + std::to_string(result->status) + ": " +
                                      result->body);
        }
        return result->body;
    }
    throw EndpointUnavailable(last_error + " after " + std::to_string(config_.max_retries + 1) +
                              " attempts");
}

Response HttpEndpoint::ask(const Question& question, const History& history) {
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& [q, r] : history) {
        messages.push_back({{"role", "user"}, {"content", q.text}});
        messages.push_back({{"role", "assistant"}, {"content", r.text}});
    }
    messages.push_back({{"role", "user"}, {"content", question.text}});

    const nlohmann::json request = {{"model", config_.model},
                                    {"messages", std::move(messages)},
                                    {"logprobs", true},
                                    {"top_logprobs", config_.top_logprobs}};

    const auto start = std::chrono::steady_clock::now();
    const std::string body = complete(request.dump());
    const auto elapsed = std::chrono::steady_clock::now() - start;

    Response response = parse_logprob_payload(body);
    response.latency_ms = static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count());
    return response;
}

}  // namespace kbd
