#pragma once

#include "kbd/environment.hpp"

namespace kbd {

// Deterministic stand-in for a target model. Each question's response entropy
// is a pure function of (config.seed, question.id):
//
//   - questions whose topic appears in known_topics draw from that profile,
//     everything else draws from unknown_entropy; draws are rejection-sampled
//     within two standard deviations of the profile mean, which together with
//     the OracleConfig invariants keeps known/unknown draws strictly inside
//     the within/beyond classification bands;
//   - with probability transition_fraction (decided per question id) the draw
//     is replaced by a uniform pick from the transition band between the
//     canonical boundary thresholds.
//
// Token distributions are synthesized so their per-position entropies sum to
// the drawn value, making every response self-consistent for downstream
// entropy scoring. Asking the same question twice yields bit-identical
// responses.
class SimulatedOracle : public Environment {
public:
    explicit SimulatedOracle(OracleConfig config);

    Response ask(const Question& question, const History& history) override;

    // The entropy ask() will realize for this question (exposed for tests and
    // landscape probes).
    double target_entropy(const Question& question) const;

    const OracleConfig& config() const { return config_; }

private:
    OracleConfig config_;
};

}  // namespace kbd
