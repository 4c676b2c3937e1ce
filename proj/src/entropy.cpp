#include "kbd/entropy.hpp"

#include <algorithm>
#include <cmath>

#include "kbd/errors.hpp"

namespace kbd {

TokenDistribution renormalize(const TokenDistribution& dist) {
    if (dist.entries.empty()) throw EmptyDistribution();
    double mass = 0.0;
    for (const auto& e : dist.entries) {
        if (e.logprob > 0.0) throw InvalidLogprob(e.logprob);
        mass += std::exp(e.logprob);
    }
    if (mass <= 0.0) throw InvalidLogprob(-INFINITY);
    TokenDistribution out;
    out.entries.reserve(dist.entries.size());
    const double log_mass = std::log(mass);
    for (const auto& e : dist.entries) {
        out.entries.push_back({e.token, std::min(0.0, e.logprob - log_mass)});
    }
    out.renormalized = true;
    return out;
}

double token_entropy(const TokenDistribution& dist) {
    if (dist.entries.empty()) throw EmptyDistribution();
    double h = 0.0;
    for (const auto& e : dist.entries) {
        if (e.logprob > 0.0) throw InvalidLogprob(e.logprob);
        const double p = std::exp(e.logprob);
        if (p > 0.0) h -= p * e.logprob;
    }
    // -p ln p is nonnegative for p in (0,1]; clamp the rounding dust away
    return std::max(0.0, h);
}

EntropyScore response_entropy(const std::vector<TokenDistribution>& dists) {
    if (dists.empty()) throw EmptyResponse();
    EntropyScore score;
    score.per_token.reserve(dists.size());
    for (const auto& d : dists) {
        const double h = token_entropy(d);
        score.per_token.push_back(h);
        score.value += h;
    }
    return score;
}

const char* to_string(BoundaryLabel label) {
    switch (label) {
        case BoundaryLabel::Within: return "within";
        case BoundaryLabel::Beyond: return "beyond";
        case BoundaryLabel::Transition: return "transition";
    }
    return "transition";
}

void BeliefEncoderParams::validate() const {
    if (!(beta > 0.0)) throw ConfigError("encoder.beta must be > 0");
    if (!(lower < e_th && e_th < upper))
        throw ConfigError("encoder thresholds must satisfy lower < e_th < upper");
}

BoundaryLabel classify_boundary(double entropy, const BeliefEncoderParams& params) {
    if (entropy <= params.lower) return BoundaryLabel::Within;
    if (entropy >= params.upper) return BoundaryLabel::Beyond;
    return BoundaryLabel::Transition;
}

BoundaryLabel classify_boundary(const EntropyScore& score, const BeliefEncoderParams& params) {
    return classify_boundary(score.value, params);
}

double belief_probability(double entropy, const BeliefEncoderParams& params) {
    const double x = params.beta * (params.e_th - entropy);
    // numerically stable logistic; exact 0.5 at x == 0
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double ex = std::exp(x);
    return ex / (1.0 + ex);
}

double belief_probability(const EntropyScore& score, const BeliefEncoderParams& params) {
    return belief_probability(score.value, params);
}

}  // namespace kbd
