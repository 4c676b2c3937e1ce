#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "kbd/environment.hpp"

namespace kbd {

enum class GoldLabel { Answerable, Unanswerable };
enum class Prediction { Known, Unknown };

const char* to_string(GoldLabel label);
const char* to_string(Prediction prediction);

// One evaluation unit. `predicted` and `confidence_score` are derived by the
// configured estimator, never hand-set by callers.
struct LabeledItem {
    std::string question;
    GoldLabel gold = GoldLabel::Answerable;
    std::string model_answer;
    double confidence_score = 0.0;  // higher means "more likely known"
    Prediction predicted = Prediction::Known;
    std::optional<std::string> gold_answer;
};

struct AwarenessScores {
    double k_aware = 0.0;  // percent of answerable items known and correct
    double u_aware = 0.0;  // percent of unanswerable items flagged unknown
    double s_aware = 0.0;  // exactly (k_aware + u_aware) / 2
};

struct MetricReport {
    double k_aware = 0.0;
    double u_aware = 0.0;
    double s_aware = 0.0;
    double eer = 0.0;
    double f1 = 0.0;
    std::size_t n = 0;
    std::string estimator;
    std::string correctness_mode;  // "gold_answer" or "predicted_only"
    std::size_t skipped = 0;       // input records dropped at load time
};

// Any vector-producing text encoder qualifies. embed() returns the raw
// vector; callers compare with cosine_similarity. Implementations signal
// outage with EmbedderUnavailable and similarity() falls back to lexical
// matching.
class TextEmbedder {
public:
    virtual ~TextEmbedder() = default;
    virtual std::vector<double> embed(const std::string& text) = 0;
};

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

bool contains_ci(const std::string& haystack, const std::string& needle);

// Jaccard overlap of lowercased alphanumeric token sets, in [0, 1].
double token_jaccard(const std::string& a, const std::string& b);

// Binary match: 1 when any ref is a case-insensitive substring of answer,
// or (with a working embedder) any cosine similarity reaches tau, or
// (lexical fallback) any token_jaccard reaches tau.
bool similarity(const std::string& answer, const std::vector<std::string>& refs, double tau,
                TextEmbedder* embedder = nullptr);

// Correctness inside k_aware: items without a gold answer count as correct;
// otherwise the model answer must match the gold answer per similarity().
AwarenessScores awareness_scores(const std::vector<LabeledItem>& items, double tau,
                                 TextEmbedder* embedder);
AwarenessScores awareness_scores(const std::vector<LabeledItem>& items);

// Sweeps accept-if-score>=threshold operating points at score midpoints and
// returns the FAR/FRR crossing, linearly interpolated between adjacent
// thresholds when no exact crossing exists. labels: 1 = genuine (accept).
double equal_error_rate(const std::vector<double>& scores, const std::vector<int>& labels);

// Positive-class F1. Defined as 0 when precision + recall is 0.
double f1_score(const std::vector<int>& predicted, const std::vector<int>& gold);

enum class BaselineKind { MinProb, FstProb, ProdProb };

// Confidence baselines over the chosen-token probabilities of a response.
double logprob_baseline(const Response& resp, BaselineKind kind);

enum class Estimator { Entropy, Confidence, Similarity };
const char* to_string(Estimator estimator);

struct EvalOptions {
    Estimator estimator = Estimator::Entropy;
    // Entropy estimator: Known iff entropy <= threshold. Confidence
    // estimator: Known iff confidence_score >= threshold.
    double threshold = 105.0;
    double tau = 0.9;
    std::vector<std::string> phrases;  // uncertainty references for Similarity
    TextEmbedder* embedder = nullptr;
    void validate() const;
};

// Derives predicted (and, for Similarity, confidence_score) on every item.
void apply_estimator(std::vector<LabeledItem>& items, const EvalOptions& options);

// Full pipeline: estimator, awareness, EER (positive class = answerable),
// F1 (positive class = unanswerable flagged unknown).
MetricReport evaluate_items(std::vector<LabeledItem> items, const EvalOptions& options);

// Line-delimited records. Accepts question|text, gold_label|label (labels
// answerable/within and unanswerable/beyond; transition records are skipped
// and counted), confidence|entropy (entropy is negated so higher always
// means more confident), and optional model_answer / gold_answer.
std::vector<LabeledItem> load_labeled_items(const std::string& path,
                                            std::size_t* skipped = nullptr);

// Plain text, one phrase per line; blank lines and #-comments ignored.
std::vector<std::string> load_phrase_file(const std::string& path);

void write_report(const MetricReport& report, const std::string& path);

}  // namespace kbd
