#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "kbd/entropy.hpp"
#include "kbd/errors.hpp"
#include "kbd/rng.hpp"

using namespace kbd;

namespace {

TokenDistribution from_probs(const std::vector<double>& probs) {
    TokenDistribution dist;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        dist.entries.push_back({"t" + std::to_string(i), std::log(probs[i])});
    }
    return dist;
}

std::vector<TokenDistribution> load_sample_positions() {
    std::ifstream in(std::string(KBD_FIXTURE_DIR) + "/logprob_sample.json");
    REQUIRE(in.good());
    nlohmann::json payload;
    in >> payload;
    std::vector<TokenDistribution> dists;
    for (const auto& position : payload["positions"]) {
        TokenDistribution dist;
        for (const auto& entry : position) {
            dist.entries.push_back({entry["token"], entry["logprob"]});
        }
        dists.push_back(std::move(dist));
    }
    return dists;
}

}  // namespace

TEST_CASE("token_entropy on uniform distributions equals ln k") {
    for (int k : {2, 4, 16}) {
        const TokenDistribution dist = from_probs(std::vector<double>(k, 1.0 / k));
        CHECK(std::abs(token_entropy(dist) - std::log(static_cast<double>(k))) < 1e-12);
    }
}

TEST_CASE("token_entropy degenerate and binary cases") {
    CHECK(token_entropy(from_probs({1.0})) == 0.0);
    CHECK(std::abs(token_entropy(from_probs({0.5, 0.5})) - 0.6931471805599453) < 1e-12);
    CHECK(std::abs(token_entropy(from_probs({0.9, 0.1})) - 0.32508297339144823) < 1e-12);
}

TEST_CASE("token_entropy rejects bad inputs") {
    CHECK_THROWS_AS(token_entropy(TokenDistribution{}), EmptyDistribution);
    TokenDistribution bad;
    bad.entries.push_back({"x", 0.25});
    CHECK_THROWS_AS(token_entropy(bad), InvalidLogprob);
}

TEST_CASE("renormalize spreads top-k mass back to unit total") {
    // top-3 slice of a larger vocabulary: mass 0.6
    const TokenDistribution sliced = from_probs({0.3, 0.2, 0.1});
    const TokenDistribution out = renormalize(sliced);
    CHECK(out.renormalized);
    REQUIRE(out.entries.size() == 3);
    double mass = 0.0;
    for (const auto& e : out.entries) mass += std::exp(e.logprob);
    CHECK(std::abs(mass - 1.0) < 1e-12);
    CHECK(std::abs(std::exp(out.entries[0].logprob) - 0.5) < 1e-12);
    CHECK(out.entries[0].token == "t0");  // order preserved
}

TEST_CASE("renormalize is idempotent within 1e-12") {
    const TokenDistribution once = renormalize(from_probs({0.3, 0.2, 0.1}));
    const TokenDistribution twice = renormalize(once);
    for (std::size_t i = 0; i < once.entries.size(); ++i) {
        CHECK(std::abs(std::exp(once.entries[i].logprob) - std::exp(twice.entries[i].logprob)) <
              1e-12);
    }
}

TEST_CASE("renormalize rejects bad inputs") {
    CHECK_THROWS_AS(renormalize(TokenDistribution{}), EmptyDistribution);
    TokenDistribution bad;
    bad.entries.push_back({"x", 1.5});
    CHECK_THROWS_AS(renormalize(bad), InvalidLogprob);
}

TEST_CASE("response_entropy sums per-position entropies") {
    const TokenDistribution binary = from_probs({0.5, 0.5});
    const EntropyScore score = response_entropy({binary, binary, binary});
    CHECK(score.token_count() == 3);
    CHECK(std::abs(score.value - 3.0 * 0.6931471805599453) < 1e-12);

    const EntropyScore single = response_entropy({from_probs({0.25, 0.25, 0.25, 0.25})});
    CHECK(std::abs(single.value - 1.3862943611198906) < 1e-12);
    CHECK(single.token_count() == 1);

    CHECK_THROWS_AS(response_entropy({}), EmptyResponse);
}

TEST_CASE("response_entropy is additive over concatenation") {
    Rng rng(11);
    std::vector<TokenDistribution> a, b;
    for (int i = 0; i < 6; ++i) {
        TokenDistribution d;
        const int k = 1 + static_cast<int>(rng.index(8));
        for (int j = 0; j < k; ++j) d.entries.push_back({"w", -5.0 * rng.uniform()});
        (i % 2 ? a : b).push_back(renormalize(d));
    }
    std::vector<TokenDistribution> both = a;
    both.insert(both.end(), b.begin(), b.end());
    CHECK(std::abs(response_entropy(both).value -
                   (response_entropy(a).value + response_entropy(b).value)) < 1e-12);
}

TEST_CASE("bundled sample payload reproduces the scripted entropy sum") {
    const auto dists = load_sample_positions();
    REQUIRE(dists.size() == 5);
    const EntropyScore score = response_entropy(dists);

    const double expected[] = {0.80181855254333734, 0.69314718055994529, 0.42804827479790553,
                               0.0, 1.3862943611198906};
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(std::abs(score.per_token[i] - expected[i]) < 1e-12);
    }
    CHECK(std::abs(score.value - 3.3093083690210787) < 1e-12);

    // a position-by-position resummation matches the aggregate exactly
    double resummed = 0.0;
    for (const auto& d : dists) resummed += token_entropy(d);
    CHECK(score.value == resummed);
}

TEST_CASE("classify_boundary honors the threshold conventions") {
    const BeliefEncoderParams params;
    CHECK(classify_boundary(26.30, params) == BoundaryLabel::Within);
    CHECK(classify_boundary(27.84, params) == BoundaryLabel::Within);
    CHECK(classify_boundary(26.63, params) == BoundaryLabel::Within);
    CHECK(classify_boundary(205.71, params) == BoundaryLabel::Beyond);
    CHECK(classify_boundary(211.29, params) == BoundaryLabel::Beyond);
    CHECK(classify_boundary(197.64, params) == BoundaryLabel::Beyond);
    CHECK(classify_boundary(100.0, params) == BoundaryLabel::Transition);

    CHECK(classify_boundary(40.0, params) == BoundaryLabel::Within);    // inclusive lower
    CHECK(classify_boundary(170.0, params) == BoundaryLabel::Beyond);   // inclusive upper
    CHECK(classify_boundary(40.0001, params) == BoundaryLabel::Transition);
    CHECK(classify_boundary(169.9999, params) == BoundaryLabel::Transition);

    EntropyScore score;
    score.value = 26.30;
    CHECK(classify_boundary(score, params) == BoundaryLabel::Within);
}

TEST_CASE("boundary label names") {
    CHECK(std::string(to_string(BoundaryLabel::Within)) == "within");
    CHECK(std::string(to_string(BoundaryLabel::Beyond)) == "beyond");
    CHECK(std::string(to_string(BoundaryLabel::Transition)) == "transition");
}

TEST_CASE("belief_probability is exactly one half at the threshold") {
    BeliefEncoderParams params;
    CHECK(belief_probability(params.e_th, params) == 0.5);
    params.beta = 0.7;
    params.e_th = 63.0;
    CHECK(belief_probability(63.0, params) == 0.5);
}

TEST_CASE("belief_probability matches the scripted sigmoid value") {
    BeliefEncoderParams params;
    params.beta = 0.1;
    params.e_th = 105.0;
    CHECK(std::abs(belief_probability(40.0, params) - 0.99849881774326300846) < 1e-12);
}

TEST_CASE("belief_probability decreases strictly and stays in (0,1)") {
    const BeliefEncoderParams params;
    Rng rng(3);
    std::vector<double> entropies;
    for (int i = 0; i < 1000; ++i) entropies.push_back(rng.uniform_in(0.0, 250.0));
    std::sort(entropies.begin(), entropies.end());
    entropies.erase(std::unique(entropies.begin(), entropies.end()), entropies.end());
    double prev = belief_probability(entropies.front(), params);
    for (std::size_t i = 1; i < entropies.size(); ++i) {
        const double p = belief_probability(entropies[i], params);
        CHECK(p < prev);
        CHECK(p > 0.0);
        CHECK(p < 1.0);
        prev = p;
    }
}

TEST_CASE("belief_probability saturates without overflow at extreme entropies") {
    const BeliefEncoderParams params;
    const double low = belief_probability(-1e6, params);
    const double high = belief_probability(1e6, params);
    CHECK(low == 1.0);  // saturated in double precision
    CHECK(high == 0.0);
    CHECK(std::isfinite(low));
    CHECK(std::isfinite(high));
}

TEST_CASE("classification and belief orientation agree under the default midpoint") {
    const BeliefEncoderParams params;
    for (double e : {0.0, 10.0, 26.3, 39.9, 40.0}) {
        REQUIRE(classify_boundary(e, params) == BoundaryLabel::Within);
        CHECK(belief_probability(e, params) > 0.5);
    }
    for (double e : {170.0, 190.0, 205.71, 500.0}) {
        REQUIRE(classify_boundary(e, params) == BoundaryLabel::Beyond);
        CHECK(belief_probability(e, params) < 0.5);
    }
}

TEST_CASE("encoder params validation names the offending constraint") {
    BeliefEncoderParams params;
    params.beta = 0.0;
    CHECK_THROWS_AS(params.validate(), ConfigError);
    params.beta = 0.05;
    params.e_th = 30.0;  // below lower
    CHECK_THROWS_AS(params.validate(), ConfigError);
    params.e_th = 171.0;  // above upper
    CHECK_THROWS_AS(params.validate(), ConfigError);
    params.e_th = 105.0;
    CHECK_NOTHROW(params.validate());
}
