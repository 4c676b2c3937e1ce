#include "kbd/agent.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <tuple>

#include "kbd/errors.hpp"

namespace kbd {

BeliefKey belief_key(const BeliefState& belief, std::optional<double> last_entropy,
                     const BeliefEncoderParams& params, int bins, int step_cap) {
    BeliefKey key;
    key.step_bucket = static_cast<int>(std::min<std::size_t>(belief.probs.size(),
                                                             static_cast<std::size_t>(step_cap)));
    double mean = 0.5;  // empty belief sits on the fence
    if (!belief.probs.empty()) {
        double sum = 0.0;
        for (double p : belief.probs) sum += p;
        mean = sum / static_cast<double>(belief.probs.size());
    }
    int bucket = static_cast<int>(std::floor(mean * static_cast<double>(bins)));
    key.mean_bucket = std::clamp(bucket, 0, bins - 1);
    key.last_label = last_entropy ? classify_boundary(*last_entropy, params)
                                  : BoundaryLabel::Transition;
    return key;
}

void AgentParams::validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("agent.alpha must be in (0, 1]");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("agent.gamma must be in [0, 1)");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("agent.epsilon must be in [0, 1]");
    if (!(epsilon_decay >= 0.0)) throw ConfigError("agent.epsilon_decay must be >= 0");
}

double AgentParams::epsilon_for_episode(int episode) const {
    return std::max(0.0, epsilon - epsilon_decay * static_cast<double>(episode));
}

std::size_t QTable::KeyHash::operator()(const Key& k) const {
    std::uint64_t h = static_cast<std::uint64_t>(k.belief.step_bucket);
    h = splitmix64(h ^ (static_cast<std::uint64_t>(k.belief.mean_bucket) << 8) ^
                   (static_cast<std::uint64_t>(k.belief.last_label) << 20));
    return static_cast<std::size_t>(splitmix64(h ^ k.action));
}

double QTable::value(const BeliefKey& key, ActionId action) const {
    auto it = cells_.find(Key{key, action});
    return it == cells_.end() ? 0.0 : it->second.value;
}

std::uint64_t QTable::visits(const BeliefKey& key, ActionId action) const {
    auto it = cells_.find(Key{key, action});
    return it == cells_.end() ? 0 : it->second.visits;
}

double QTable::max_over(const BeliefKey& key, const std::vector<ActionId>& actions) const {
    double best = 0.0;
    bool first = true;
    for (ActionId a : actions) {
        const double v = value(key, a);
        if (first || v > best) best = v;
        first = false;
    }
    return actions.empty() ? 0.0 : best;
}

void QTable::set(const BeliefKey& key, ActionId action, double v) {
    cells_[Key{key, action}].value = v;
}

void QTable::add_visit(const BeliefKey& key, ActionId action) {
    cells_[Key{key, action}].visits += 1;
}

std::uint64_t QTable::total_visits() const {
    std::uint64_t total = 0;
    for (const auto& [k, cell] : cells_) total += cell.visits;
    return total;
}

void QTable::save(const std::string& path) const {
    // sort rows so snapshots of identical tables are byte-identical
    std::map<std::tuple<int, int, int, ActionId>, const Cell*> ordered;
    for (const auto& [k, cell] : cells_) {
        ordered[{k.belief.step_bucket, k.belief.mean_bucket,
                 static_cast<int>(k.belief.last_label), k.action}] = &cell;
    }
    std::ofstream out(path);
    if (!out) throw IoFailure("cannot open " + path + " for writing");
    out << "step_bucket\tmean_bucket\tlabel\taction\tvalue\tvisits\n";
    char line[160];
    for (const auto& [key, cell] : ordered) {
        const auto label = static_cast<BoundaryLabel>(std::get<2>(key));
        std::snprintf(line, sizeof(line), "%d\t%d\t%s\t%016llx\t%.17g\t%llu\n", std::get<0>(key),
                      std::get<1>(key), to_string(label),
                      static_cast<unsigned long long>(std::get<3>(key)), cell->value,
                      static_cast<unsigned long long>(cell->visits));
        out << line;
    }
    if (!out.good()) throw IoFailure("short write to " + path);
}

namespace {

BoundaryLabel label_from_string(const std::string& text) {
    if (text == "within") return BoundaryLabel::Within;
    if (text == "beyond") return BoundaryLabel::Beyond;
    if (text == "transition") return BoundaryLabel::Transition;
    throw IoFailure("unknown boundary label '" + text + "' in q-table snapshot");
}

}  // namespace

QTable QTable::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open " + path);
    QTable table;
    std::string header;
    std::getline(in, header);
    int step = 0, mean = 0;
    std::string label;
    unsigned long long action = 0, visits = 0;
    double value = 0.0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        char label_buf[32];
        if (std::sscanf(line.c_str(), "%d\t%d\t%31s\t%llx\t%lg\t%llu", &step, &mean, label_buf,
                        &action, &value, &visits) != 6) {
            throw IoFailure("bad q-table row: " + line);
        }
        label = label_buf;
        BeliefKey key{step, mean, label_from_string(label)};
        Cell& cell = table.cells_[Key{key, static_cast<ActionId>(action)}];
        cell.value = value;
        cell.visits = visits;
    }
    return table;
}

double reward(std::optional<double> e_prev, double e_current) {
    if (!e_prev || !std::isfinite(*e_prev)) return 0.0;
    return std::abs(*e_prev - e_current);
}

std::size_t select_action_index(const QTable& q, const BeliefKey& key,
                                const std::vector<ActionId>& candidates,
                                const AgentParams& params, Rng& rng) {
    if (candidates.empty()) throw EmptyActionSet();
    if (rng.uniform() < params.epsilon) return rng.index(candidates.size());
    std::size_t best = 0;
    double best_value = q.value(key, candidates[0]);
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        const double v = q.value(key, candidates[i]);
        if (v > best_value) {
            best = i;
            best_value = v;
        }
    }
    return best;
}

ActionId select_action(const QTable& q, const BeliefKey& key,
                       const std::vector<ActionId>& candidates, const AgentParams& params,
                       Rng& rng) {
    return candidates[select_action_index(q, key, candidates, params, rng)];
}

double q_update(QTable& q, const BeliefKey& key, ActionId action, double r,
                const BeliefKey& next_key, const std::vector<ActionId>& next_candidates,
                const AgentParams& params) {
    const double current = q.value(key, action);
    const double max_next = q.max_over(next_key, next_candidates);
    const double updated = current + params.alpha * (r + params.gamma * max_next - current);
    q.set(key, action, updated);
    q.add_visit(key, action);
    return updated;
}

}  // namespace kbd
