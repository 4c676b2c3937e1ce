#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "kbd/entropy.hpp"
#include "kbd/rng.hpp"

namespace kbd {

using ActionId = std::uint64_t;

// Belief over the explored questions: one P(within | E_i) per completed
// interaction, in interaction order.
struct BeliefState {
    std::vector<double> probs;
    std::string topic;
};

// Tabular projection of a BeliefState. step_bucket saturates at the cap so
// late-episode states share rows; mean_bucket discretizes the average belief
// probability; last_label is the boundary label of the latest response.
struct BeliefKey {
    int step_bucket = 0;
    int mean_bucket = 0;
    BoundaryLabel last_label = BoundaryLabel::Transition;

    bool operator==(const BeliefKey&) const = default;
};

inline constexpr int kDefaultStepCap = 3;
inline constexpr int kDefaultMeanBins = 10;

BeliefKey belief_key(const BeliefState& belief, std::optional<double> last_entropy,
                     const BeliefEncoderParams& params, int bins = kDefaultMeanBins,
                     int step_cap = kDefaultStepCap);

struct AgentParams {
    double alpha = 0.1;          // learning rate, (0, 1]
    double gamma = 0.9;          // discount, [0, 1)
    double epsilon = 0.2;        // exploration rate, [0, 1]
    double epsilon_decay = 0.0;  // optional linear per-episode decay, 0 = constant
    std::uint64_t rng_seed = 7;

    void validate() const;  // throws ConfigError naming the offending field
    double epsilon_for_episode(int episode) const;
};

class QTable {
public:
    // Unvisited cells read as 0.
    double value(const BeliefKey& key, ActionId action) const;
    std::uint64_t visits(const BeliefKey& key, ActionId action) const;

    // Largest Q over the given actions; empty set reads 0 (terminal
    // bootstrap).
    double max_over(const BeliefKey& key, const std::vector<ActionId>& actions) const;

    void set(const BeliefKey& key, ActionId action, double value);
    void add_visit(const BeliefKey& key, ActionId action);

    std::size_t size() const { return cells_.size(); }
    std::uint64_t total_visits() const;

    // Flat-table snapshot: one sorted row per cell. save throws IoFailure;
    // load replaces the table contents.
    void save(const std::string& path) const;
    static QTable load(const std::string& path);

private:
    struct Cell {
        double value = 0.0;
        std::uint64_t visits = 0;
    };
    struct Key {
        BeliefKey belief;
        ActionId action;
        bool operator==(const Key&) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const;
    };
    std::unordered_map<Key, Cell, KeyHash> cells_;
};

// |E_prev - E_current|; first interaction (no previous entropy) rewards 0.
double reward(std::optional<double> e_prev, double e_current);

// Epsilon-greedy pick over the candidate list: with probability epsilon a
// uniform draw, otherwise argmax of Q(key, a) with ties broken by lowest
// candidate index. Throws EmptyActionSet.
std::size_t select_action_index(const QTable& q, const BeliefKey& key,
                                const std::vector<ActionId>& candidates,
                                const AgentParams& params, Rng& rng);
ActionId select_action(const QTable& q, const BeliefKey& key,
                       const std::vector<ActionId>& candidates, const AgentParams& params,
                       Rng& rng);

// One Bellman backup: Q += alpha * (r + gamma * max_next - Q), where max_next
// ranges over next_candidates (empty when the episode terminated). Returns
// the updated value and bumps the visit count exactly once.
double q_update(QTable& q, const BeliefKey& key, ActionId action, double r,
                const BeliefKey& next_key, const std::vector<ActionId>& next_candidates,
                const AgentParams& params);

}  // namespace kbd
