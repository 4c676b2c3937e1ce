#pragma once

#include <string>
#include <vector>

namespace kbd {

// One generation position: the candidate tokens the model considered and
// their log probabilities (natural log). By convention entries[0] is the
// token that was actually emitted.
struct TokenEntry {
    std::string token;
    double logprob = 0.0;  // ln p, must be <= 0
};

struct TokenDistribution {
    std::vector<TokenEntry> entries;
    // True when the entries came from a top-k slice and the tail mass was
    // redistributed so the probabilities sum to 1 again.
    bool renormalized = false;
};

// Spread the probability mass of a top-k slice back to 1. Entry order is
// preserved; applying it to an already normalized distribution is a no-op up
// to rounding.
TokenDistribution renormalize(const TokenDistribution& dist);

// Shannon entropy of one position, in nats. Throws EmptyDistribution /
// InvalidLogprob.
double token_entropy(const TokenDistribution& dist);

struct EntropyScore {
    double value = 0.0;             // sum of per_token, nats
    std::vector<double> per_token;  // one entry per position
    std::size_t token_count() const { return per_token.size(); }
};

// Whole-response entropy: per-position entropies and their sum. Throws
// EmptyResponse when dists is empty.
EntropyScore response_entropy(const std::vector<TokenDistribution>& dists);

enum class BoundaryLabel { Within, Beyond, Transition };

const char* to_string(BoundaryLabel label);

// Canonical boundary thresholds, in nats. Everything below `lower` reads as
// confident knowledge, everything above `upper` as ignorance; the band in
// between is the transition zone the agent explores.
inline constexpr double kDefaultLowerBound = 40.0;
inline constexpr double kDefaultUpperBound = 170.0;

struct BeliefEncoderParams {
    double e_th = 105.0;   // sigmoid midpoint
    double beta = 0.05;    // sigmoid steepness, > 0
    double lower = kDefaultLowerBound;
    double upper = kDefaultUpperBound;

    // Throws ConfigError unless beta > 0 and lower < e_th < upper.
    void validate() const;
};

// Within iff value <= lower, Beyond iff value >= upper, else Transition.
BoundaryLabel classify_boundary(const EntropyScore& score, const BeliefEncoderParams& params);
BoundaryLabel classify_boundary(double entropy, const BeliefEncoderParams& params);

// P(question lies within the knowledge boundary | response entropy E):
// sigmoid(beta * (e_th - E)). Exactly 0.5 at E = e_th, strictly decreasing.
double belief_probability(const EntropyScore& score, const BeliefEncoderParams& params);
double belief_probability(double entropy, const BeliefEncoderParams& params);

}  // namespace kbd
