#include "kbd/oracle.hpp"

#include <cmath>
#include <cstdio>

#include "kbd/errors.hpp"

namespace kbd {

namespace {

constexpr int kAlternativesPerPosition = 16;
constexpr double kTargetEntropyPerToken = 2.0;  // < ln(16), so always reachable
constexpr double kTransitionMargin = 5.0;

// Entropy of the mixture t * point-mass + (1 - t) * uniform over k entries.
double mixture_entropy(double t, int k) {
    const double head = t + (1.0 - t) / k;
    const double tail = (1.0 - t) / k;
    double h = 0.0;
    if (head > 0.0) h -= head * std::log(head);
    if (tail > 0.0) h -= (k - 1) * tail * std::log(tail);
    return h;
}

// Invert mixture_entropy by bisection; it is strictly decreasing in t.
double solve_mixture(double target, int k) {
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 64; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mixture_entropy(mid, k) > target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace

void OracleConfig::validate() const {
    if (!(transition_fraction >= 0.0 && transition_fraction <= 1.0))
        throw ConfigError("oracle.transition_fraction must be in [0, 1]");
    for (const auto& [topic, profile] : known_topics) {
        if (profile.std < 0.0) throw ConfigError("oracle profile std must be >= 0 (" + topic + ")");
        if (!(profile.mean < kDefaultLowerBound - 2.0 * profile.std))
            throw ConfigError("oracle known topic '" + topic +
                              "' mean must sit below lower - 2*std");
    }
    if (unknown_entropy.std < 0.0) throw ConfigError("oracle.unknown_std must be >= 0");
    if (!(unknown_entropy.mean > kDefaultUpperBound + 2.0 * unknown_entropy.std))
        throw ConfigError("oracle unknown mean must sit above upper + 2*std");
}

SimulatedOracle::SimulatedOracle(OracleConfig config) : config_(std::move(config)) {
    config_.validate();
}

double SimulatedOracle::target_entropy(const Question& question) const {
    const std::uint64_t base = splitmix64(config_.seed ^ fnv1a(question.id));

    if (config_.transition_fraction > 0.0) {
        Rng band_rng(splitmix64(base ^ fnv1a("transition")));
        if (band_rng.uniform() < config_.transition_fraction) {
            return band_rng.uniform_in(kDefaultLowerBound + kTransitionMargin,
                                       kDefaultUpperBound - kTransitionMargin);
        }
    }

    auto it = config_.known_topics.find(question.topic);
    const TopicProfile& profile =
        it != config_.known_topics.end() ? it->second : config_.unknown_entropy;

    Rng draw_rng(splitmix64(base ^ fnv1a("entropy")));
    double z = draw_rng.gaussian();
    for (int attempt = 0; attempt < 64 && std::abs(z) > 2.0; ++attempt) z = draw_rng.gaussian();
    if (std::abs(z) > 2.0) z = 0.0;  // unreachable in practice; keeps the draw bounded
    return profile.mean + profile.std * z;
}

Response SimulatedOracle::ask(const Question& question, const History&) {
    const double target = std::max(1e-6, target_entropy(question));

    const int positions = std::max(1, static_cast<int>(std::ceil(target / kTargetEntropyPerToken)));
    const double per_token = target / positions;
    const double t = solve_mixture(per_token, kAlternativesPerPosition);

    const double head = t + (1.0 - t) / kAlternativesPerPosition;
    const double tail = (1.0 - t) / kAlternativesPerPosition;

    TokenDistribution dist;
    dist.entries.reserve(kAlternativesPerPosition);
    char name[16];
    for (int i = 0; i < kAlternativesPerPosition; ++i) {
        std::snprintf(name, sizeof(name), "w%02d", i);
        const double p = i == 0 ? head : tail;
        dist.entries.push_back({name, std::log(p)});
    }

    Response response;
    response.token_dists.assign(positions, dist);
    response.entropy = response_entropy(response.token_dists);
    char text[160];
    std::snprintf(text, sizeof(text), "simulated answer [%s] (%.8s, %d tokens)",
                  question.topic.c_str(), question.id.c_str(), positions);
    response.text = text;
    response.latency_ms = 0;
    return response;
}

}  // namespace kbd
