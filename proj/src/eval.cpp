#include "kbd/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <utility>

#include <json.hpp>

#include "kbd/errors.hpp"

namespace kbd {

namespace {

std::string to_lower(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string trim(const std::string& s) {
    std::size_t begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    std::size_t end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::set<std::string> token_set(const std::string& s) {
    std::set<std::string> tokens;
    std::string current;
    for (unsigned char c : s) {
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.insert(current);
            current.clear();
        }
    }
    if (!current.empty()) tokens.insert(current);
    return tokens;
}

bool answer_correct(const LabeledItem& item, double tau, TextEmbedder* embedder) {
    if (!item.gold_answer) return true;
    return similarity(item.model_answer, {trim(*item.gold_answer)}, tau, embedder);
}

}  // namespace

const char* to_string(GoldLabel label) {
    return label == GoldLabel::Answerable ? "answerable" : "unanswerable";
}

const char* to_string(Prediction prediction) {
    return prediction == Prediction::Known ? "known" : "unknown";
}

const char* to_string(Estimator estimator) {
    switch (estimator) {
        case Estimator::Entropy: return "entropy";
        case Estimator::Confidence: return "confidence";
        case Estimator::Similarity: return "similarity";
    }
    return "entropy";
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw EmbedderUnavailable("embedding dimensions differ");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

bool contains_ci(const std::string& haystack, const std::string& needle) {
    if (needle.empty()) return false;
    return to_lower(haystack).find(to_lower(needle)) != std::string::npos;
}

double token_jaccard(const std::string& a, const std::string& b) {
    const std::set<std::string> ta = token_set(a);
    const std::set<std::string> tb = token_set(b);
    if (ta.empty() && tb.empty()) return 1.0;
    std::size_t common = 0;
    for (const auto& t : ta) common += tb.count(t);
    const std::size_t total = ta.size() + tb.size() - common;
    return total == 0 ? 1.0 : static_cast<double>(common) / static_cast<double>(total);
}

bool similarity(const std::string& answer, const std::vector<std::string>& refs, double tau,
                TextEmbedder* embedder) {
    for (const auto& ref : refs) {
        if (contains_ci(answer, ref)) return true;
    }
    if (embedder != nullptr) {
        try {
            const std::vector<double> a = embedder->embed(answer);
            for (const auto& ref : refs) {
                if (cosine_similarity(a, embedder->embed(ref)) >= tau) return true;
            }
            return false;
        } catch (const EmbedderUnavailable& e) {
            std::fprintf(stderr, "warning: %s; falling back to lexical matching\n", e.what());
        }
    }
    for (const auto& ref : refs) {
        if (token_jaccard(answer, ref) >= tau) return true;
    }
    return false;
}

AwarenessScores awareness_scores(const std::vector<LabeledItem>& items, double tau,
                                 TextEmbedder* embedder) {
    std::size_t n_answerable = 0, n_unanswerable = 0;
    std::size_t known_hits = 0, unknown_hits = 0;
    for (const auto& item : items) {
        if (item.gold == GoldLabel::Answerable) {
            ++n_answerable;
            if (item.predicted == Prediction::Known && answer_correct(item, tau, embedder)) {
                ++known_hits;
            }
        } else {
            ++n_unanswerable;
            if (item.predicted == Prediction::Unknown) ++unknown_hits;
        }
    }
    if (n_answerable == 0 || n_unanswerable == 0) throw DegenerateLabels();

    AwarenessScores scores;
    scores.k_aware = 100.0 * static_cast<double>(known_hits) / static_cast<double>(n_answerable);
    scores.u_aware =
        100.0 * static_cast<double>(unknown_hits) / static_cast<double>(n_unanswerable);
    scores.s_aware = (scores.k_aware + scores.u_aware) / 2.0;
    return scores;
}

AwarenessScores awareness_scores(const std::vector<LabeledItem>& items) {
    return awareness_scores(items, 0.9, nullptr);
}

double equal_error_rate(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) {
        throw DegenerateLabels("equal_error_rate needs aligned scores and labels");
    }
    std::size_t n_pos = 0, n_neg = 0;
    for (int label : labels) (label != 0 ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0) throw DegenerateLabels();

    std::vector<std::pair<double, int>> pairs(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) pairs[i] = {scores[i], labels[i]};
    std::sort(pairs.begin(), pairs.end());

    // operating points: accept iff score >= threshold; thresholds below the
    // minimum, at midpoints of adjacent distinct scores, above the maximum
    std::vector<double> thresholds;
    thresholds.push_back(pairs.front().first - 1.0);
    for (std::size_t i = 0; i + 1 < pairs.size(); ++i) {
        if (pairs[i].first != pairs[i + 1].first) {
            thresholds.push_back((pairs[i].first + pairs[i + 1].first) / 2.0);
        }
    }
    thresholds.push_back(pairs.back().first + 1.0);

    // FAR starts at 1 and falls, FRR starts at 0 and rises, so d = FAR - FRR
    // crosses zero exactly once; interpolate if it jumps past zero.
    std::size_t idx = 0;
    std::size_t rejected_pos = 0, rejected_neg = 0;
    double prev_far = 1.0, prev_d = 1.0;
    for (double threshold : thresholds) {
        while (idx < pairs.size() && pairs[idx].first < threshold) {
            (pairs[idx].second != 0 ? rejected_pos : rejected_neg)++;
            ++idx;
        }
        const double far =
            static_cast<double>(n_neg - rejected_neg) / static_cast<double>(n_neg);
        const double frr = static_cast<double>(rejected_pos) / static_cast<double>(n_pos);
        const double d = far - frr;
        if (d == 0.0) return far;
        if (d < 0.0) {
            const double w = prev_d / (prev_d - d);
            return prev_far + w * (far - prev_far);
        }
        prev_far = far;
        prev_d = d;
    }
    return prev_far;  // unreachable: the final threshold rejects everything
}

double f1_score(const std::vector<int>& predicted, const std::vector<int>& gold) {
    if (predicted.size() != gold.size()) {
        throw DegenerateLabels("f1_score needs aligned predictions and gold labels");
    }
    std::size_t tp = 0, fp = 0, fn = 0, gold_positives = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        const bool p = predicted[i] != 0;
        const bool g = gold[i] != 0;
        if (g) ++gold_positives;
        if (p && g) ++tp;
        if (p && !g) ++fp;
        if (!p && g) ++fn;
    }
    if (gold_positives == 0) throw DegenerateLabels("f1_score needs at least one gold positive");
    if (tp == 0) return 0.0;
    return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

double logprob_baseline(const Response& resp, BaselineKind kind) {
    if (resp.token_dists.empty()) throw EmptyResponse();
    double min_p = 1.0, first_p = 0.0, prod_p = 1.0;
    for (std::size_t i = 0; i < resp.token_dists.size(); ++i) {
        const auto& dist = resp.token_dists[i];
        if (dist.entries.empty()) throw EmptyDistribution();
        const double p = std::exp(dist.entries[0].logprob);  // chosen token leads
        if (i == 0) first_p = p;
        min_p = std::min(min_p, p);
        prod_p *= p;
    }
    switch (kind) {
        case BaselineKind::MinProb: return min_p;
        case BaselineKind::FstProb: return first_p;
        case BaselineKind::ProdProb: return prod_p;
    }
    return min_p;
}

void EvalOptions::validate() const {
    if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("eval.tau must be in (0, 1)");
    if (estimator == Estimator::Similarity && phrases.empty()) {
        throw ConfigError(
            "eval.phrases must supply at least one reference phrase for the similarity "
            "estimator");
    }
}

void apply_estimator(std::vector<LabeledItem>& items, const EvalOptions& options) {
    options.validate();
    switch (options.estimator) {
        case Estimator::Entropy: {
            // loaded entropies are negated, so Known iff entropy <= threshold
            const double cut = -options.threshold;
            for (auto& item : items) {
                item.predicted =
                    item.confidence_score >= cut ? Prediction::Known : Prediction::Unknown;
            }
            break;
        }
        case Estimator::Confidence:
            for (auto& item : items) {
                item.predicted = item.confidence_score >= options.threshold ? Prediction::Known
                                                                            : Prediction::Unknown;
            }
            break;
        case Estimator::Similarity:
            for (auto& item : items) {
                const bool declined =
                    similarity(item.model_answer, options.phrases, options.tau, options.embedder);
                item.predicted = declined ? Prediction::Unknown : Prediction::Known;
                item.confidence_score = declined ? 0.0 : 1.0;
            }
            break;
    }
}

MetricReport evaluate_items(std::vector<LabeledItem> items, const EvalOptions& options) {
    if (items.empty()) throw DegenerateLabels();
    apply_estimator(items, options);

    MetricReport report;
    const AwarenessScores scores = awareness_scores(items, options.tau, options.embedder);
    report.k_aware = scores.k_aware;
    report.u_aware = scores.u_aware;
    report.s_aware = scores.s_aware;

    std::vector<double> confidence(items.size());
    std::vector<int> genuine(items.size());
    std::vector<int> predicted_unknown(items.size());
    std::vector<int> gold_unanswerable(items.size());
    bool any_gold_answer = false;
    for (std::size_t i = 0; i < items.size(); ++i) {
        confidence[i] = items[i].confidence_score;
        genuine[i] = items[i].gold == GoldLabel::Answerable ? 1 : 0;
        predicted_unknown[i] = items[i].predicted == Prediction::Unknown ? 1 : 0;
        gold_unanswerable[i] = items[i].gold == GoldLabel::Unanswerable ? 1 : 0;
        any_gold_answer = any_gold_answer || items[i].gold_answer.has_value();
    }
    report.eer = equal_error_rate(confidence, genuine);
    report.f1 = f1_score(predicted_unknown, gold_unanswerable);
    report.n = items.size();
    report.estimator = to_string(options.estimator);
    report.correctness_mode = any_gold_answer ? "gold_answer" : "predicted_only";
    return report;
}

std::vector<LabeledItem> load_labeled_items(const std::string& path, std::size_t* skipped) {
    std::ifstream in(path);
    if (!in.good()) throw IoFailure("cannot open labeled dataset: " + path);

    std::vector<LabeledItem> items;
    std::size_t dropped = 0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        try {
            const nlohmann::json record = nlohmann::json::parse(line);
            LabeledItem item;
            if (record.contains("question")) {
                item.question = record.at("question").get<std::string>();
            } else if (record.contains("text")) {
                item.question = record.at("text").get<std::string>();
            } else {
                throw IoFailure(where + ": record needs a question or text field");
            }

            std::string label;
            if (record.contains("gold_label")) {
                label = to_lower(record.at("gold_label").get<std::string>());
            } else if (record.contains("label")) {
                label = to_lower(record.at("label").get<std::string>());
            } else {
                throw IoFailure(where + ": record needs a gold_label or label field");
            }
            if (label == "answerable" || label == "within") {
                item.gold = GoldLabel::Answerable;
            } else if (label == "unanswerable" || label == "beyond") {
                item.gold = GoldLabel::Unanswerable;
            } else if (label == "transition") {
                ++dropped;
                continue;
            } else {
                throw IoFailure(where + ": unknown label '" + label + "'");
            }

            if (record.contains("model_answer")) {
                item.model_answer = record.at("model_answer").get<std::string>();
            }
            if (record.contains("confidence")) {
                item.confidence_score = record.at("confidence").get<double>();
            } else if (record.contains("entropy")) {
                item.confidence_score = -record.at("entropy").get<double>();
            } else {
                throw IoFailure(where + ": record needs a confidence or entropy field");
            }
            if (record.contains("gold_answer")) {
                item.gold_answer = record.at("gold_answer").get<std::string>();
            }
            items.push_back(std::move(item));
        } catch (const nlohmann::json::exception& e) {
            throw IoFailure(where + ": " + e.what());
        }
    }
    if (skipped != nullptr) *skipped = dropped;
    return items;
}

std::vector<std::string> load_phrase_file(const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) throw IoFailure("cannot open phrase file: " + path);
    std::vector<std::string> phrases;
    std::string line;
    while (std::getline(in, line)) {
        const std::string phrase = trim(line);
        if (phrase.empty() || phrase[0] == '#') continue;
        phrases.push_back(phrase);
    }
    return phrases;
}

void write_report(const MetricReport& report, const std::string& path) {
    nlohmann::ordered_json j;
    j["k_aware"] = report.k_aware;
    j["u_aware"] = report.u_aware;
    j["s_aware"] = report.s_aware;
    j["eer"] = report.eer;
    j["f1"] = report.f1;
    j["n"] = report.n;
    j["estimator"] = report.estimator;
    j["correctness_mode"] = report.correctness_mode;
    j["skipped"] = report.skipped;
    std::ofstream out(path);
    if (!out.good()) throw IoFailure("cannot write report: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace kbd
