#pragma once

#include <set>
#include <string>
#include <vector>

namespace dcvd {

struct ConfusionCounts {
    long tp = 0, fp = 0, fn = 0, tn = 0;
    long total() const { return tp + fp + fn + tn; }
};

/// mcc in [-1, 1]; precision/recall/f1 as percentages in [0, 100].
/// Zero denominators yield 0 by convention.
struct ClassificationMetrics {
    double mcc = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

ClassificationMetrics classification_metrics(const ConfusionCounts& counts);

/// One evaluated function: truth, function-level probability, per-line
/// probabilities (token-less lines unscored) and the flaw-line ground truth.
struct LinePrediction {
    int line = 0;
    bool scored = false;
    double prob = 0.0;
};

struct FunctionPrediction {
    std::string id;
    int y_true = 0;
    double y_prob = 0.0;
    std::vector<LinePrediction> lines;
    std::set<int> flaw_lines;
};

ConfusionCounts function_confusion(const std::vector<FunctionPrediction>& preds,
                                   double threshold = 0.5);

/// Two-Phase: lines of functions predicted benign count as predicted-negative.
ConfusionCounts two_phase_statement_eval(const std::vector<FunctionPrediction>& preds,
                                         double threshold = 0.5);
/// One-Phase: every line thresholded independently of the function verdict.
ConfusionCounts one_phase_statement_eval(const std::vector<FunctionPrediction>& preds,
                                         double threshold = 0.5);

/// Scored lines of one truly vulnerable function, ordered by descending score
/// with ties broken by ascending line index.
struct RankingRecord {
    std::string id;
    std::vector<int> ranked_lines;
    std::set<int> flaw_lines;
};

RankingRecord make_ranking_record(const FunctionPrediction& pred);

/// top1/3/5 as percentages; mfr/mar as mean 1-based ranks.
struct RankingMetrics {
    double top1 = 0.0, top3 = 0.0, top5 = 0.0;
    double mfr = 0.0, mar = 0.0;
    int functions = 0;
    int skipped = 0;  // vulnerable functions whose flaw lines were all unscored
};

RankingMetrics ranking_metrics(const std::vector<RankingRecord>& records);

struct MetricsReport {
    ClassificationMetrics function_level;
    ClassificationMetrics stmt_two_phase;
    ClassificationMetrics stmt_one_phase;
    bool has_statement_metrics = true;
    RankingMetrics ranking;
    double composite = 0.0;
    int n_functions = 0;
    int n_unscored_lines = 0;  // excluded from all statement denominators
    std::vector<std::string> notes;
};

/// Score = (Func F1 + Two-Phase Stmt F1 + One-Phase Stmt F1 + Top-1) / 4,
/// all inputs as percentages.
double composite_score(double func_f1, double stmt_two_phase_f1, double stmt_one_phase_f1,
                       double top1);

MetricsReport build_report(const std::vector<FunctionPrediction>& preds,
                           bool statement_metrics = true, double threshold = 0.5);

std::string report_to_json(const MetricsReport& report);
std::string report_to_table(const MetricsReport& report, const std::string& title);
std::string report_to_csv(const MetricsReport& report);

// ---------------------------------------------------------------------------

struct TTestResult {
    double t = 0.0;
    int df = 0;
    double p_value = 1.0;
    bool degenerate = false;  // zero variance of differences
    std::string significance; // "***", "**", "*" or "n.s."
};

/// Two-sided paired t-test over equal-length runs (n >= 2).
TTestResult paired_t_test(const std::vector<double>& runs_a, const std::vector<double>& runs_b);

/// Regularized incomplete beta I_x(a, b), exposed for the t-distribution tail.
double incomplete_beta(double a, double b, double x);

}  // namespace dcvd
