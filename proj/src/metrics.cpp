#include "dcvd/metrics.hpp"

#include "dcvd/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace dcvd {

using nlohmann::json;

ClassificationMetrics classification_metrics(const ConfusionCounts& c) {
    check(c.tp >= 0 && c.fp >= 0 && c.fn >= 0 && c.tn >= 0, "classification_metrics: negative count");
    check(c.total() > 0, "classification_metrics: all counts are zero");

    ClassificationMetrics m;
    double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
    double fn = static_cast<double>(c.fn), tn = static_cast<double>(c.tn);

    double prec = (tp + fp) > 0 ? tp / (tp + fp) : 0.0;
    double rec = (tp + fn) > 0 ? tp / (tp + fn) : 0.0;
    m.precision = 100.0 * prec;
    m.recall = 100.0 * rec;
    m.f1 = (prec + rec) > 0 ? 100.0 * 2.0 * prec * rec / (prec + rec) : 0.0;

    double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    m.mcc = denom > 0 ? (tp * tn - fp * fn) / std::sqrt(denom) : 0.0;
    return m;
}

ConfusionCounts function_confusion(const std::vector<FunctionPrediction>& preds, double threshold) {
    ConfusionCounts c;
    for (const auto& p : preds) {
        bool predicted = p.y_prob >= threshold;
        if (predicted && p.y_true == 1) ++c.tp;
        else if (predicted && p.y_true == 0) ++c.fp;
        else if (!predicted && p.y_true == 1) ++c.fn;
        else ++c.tn;
    }
    return c;
}

namespace {

ConfusionCounts statement_eval(const std::vector<FunctionPrediction>& preds, double threshold,
                               bool gate_on_function) {
    ConfusionCounts c;
    for (const auto& p : preds) {
        bool function_positive = p.y_prob >= threshold;
        // gated-off functions never need line probabilities; everything else does
        if (p.lines.empty() && (!gate_on_function || function_positive))
            throw std::invalid_argument("statement eval: function " + p.id +
                                        " carries no line probabilities");
        for (const auto& line : p.lines) {
            if (!line.scored) continue;  // token-less lines never enter the denominators
            bool truth = p.flaw_lines.count(line.line) > 0;
            bool predicted = line.prob >= threshold;
            if (gate_on_function && !function_positive) predicted = false;
            if (predicted && truth) ++c.tp;
            else if (predicted && !truth) ++c.fp;
            else if (!predicted && truth) ++c.fn;
            else ++c.tn;
        }
    }
    return c;
}

}  // namespace

ConfusionCounts two_phase_statement_eval(const std::vector<FunctionPrediction>& preds,
                                         double threshold) {
    return statement_eval(preds, threshold, true);
}

ConfusionCounts one_phase_statement_eval(const std::vector<FunctionPrediction>& preds,
                                         double threshold) {
    return statement_eval(preds, threshold, false);
}

RankingRecord make_ranking_record(const FunctionPrediction& pred) {
    RankingRecord rec;
    rec.id = pred.id;
    rec.flaw_lines = pred.flaw_lines;
    std::vector<const LinePrediction*> scored;
    for (const auto& line : pred.lines)
        if (line.scored) scored.push_back(&line);
    std::sort(scored.begin(), scored.end(), [](const LinePrediction* a, const LinePrediction* b) {
        if (a->prob != b->prob) return a->prob > b->prob;
        return a->line < b->line;  // deterministic tie-break
    });
    for (const auto* line : scored) rec.ranked_lines.push_back(line->line);
    return rec;
}

RankingMetrics ranking_metrics(const std::vector<RankingRecord>& records) {
    check(!records.empty(), "ranking_metrics: no records");
    RankingMetrics m;
    double sum_first = 0.0, sum_mean = 0.0;
    long hit1 = 0, hit3 = 0, hit5 = 0;

    for (const auto& rec : records) {
        check(!rec.flaw_lines.empty(), "ranking_metrics: record " + rec.id + " has no flaw lines");
        std::vector<int> flaw_ranks;  // 1-based
        for (std::size_t r = 0; r < rec.ranked_lines.size(); ++r)
            if (rec.flaw_lines.count(rec.ranked_lines[r])) flaw_ranks.push_back(static_cast<int>(r) + 1);
        if (flaw_ranks.empty()) {
            ++m.skipped;  // every flaw line unscored: no rank exists
            continue;
        }
        ++m.functions;
        int first = flaw_ranks.front();
        double mean_rank = 0.0;
        for (int r : flaw_ranks) mean_rank += r;
        mean_rank /= static_cast<double>(flaw_ranks.size());
        sum_first += first;
        sum_mean += mean_rank;
        if (first <= 1) ++hit1;
        if (first <= 3) ++hit3;
        if (first <= 5) ++hit5;
    }
    check(m.functions > 0, "ranking_metrics: no function had a scored flaw line");
    m.top1 = 100.0 * static_cast<double>(hit1) / m.functions;
    m.top3 = 100.0 * static_cast<double>(hit3) / m.functions;
    m.top5 = 100.0 * static_cast<double>(hit5) / m.functions;
    m.mfr = sum_first / m.functions;
    m.mar = sum_mean / m.functions;
    return m;
}

double composite_score(double func_f1, double stmt_two_phase_f1, double stmt_one_phase_f1,
                       double top1) {
    return (func_f1 + stmt_two_phase_f1 + stmt_one_phase_f1 + top1) / 4.0;
}

MetricsReport build_report(const std::vector<FunctionPrediction>& preds, bool statement_metrics,
                           double threshold) {
    check(!preds.empty(), "build_report: no predictions");
    MetricsReport report;
    report.n_functions = static_cast<int>(preds.size());
    report.function_level = classification_metrics(function_confusion(preds, threshold));
    report.has_statement_metrics = statement_metrics;

    for (const auto& p : preds)
        for (const auto& line : p.lines)
            if (!line.scored) ++report.n_unscored_lines;
    if (report.n_unscored_lines > 0)
        report.notes.push_back(std::to_string(report.n_unscored_lines) +
                               " token-less line(s) excluded from statement metrics");

    if (!statement_metrics) return report;

    report.stmt_two_phase = classification_metrics(two_phase_statement_eval(preds, threshold));
    report.stmt_one_phase = classification_metrics(one_phase_statement_eval(preds, threshold));

    std::vector<RankingRecord> records;
    for (const auto& p : preds)
        if (p.y_true == 1 && !p.flaw_lines.empty()) records.push_back(make_ranking_record(p));
    if (!records.empty()) {
        report.ranking = ranking_metrics(records);
        if (report.ranking.skipped > 0)
            report.notes.push_back(std::to_string(report.ranking.skipped) +
                                   " vulnerable function(s) skipped from ranking (no scored flaw line)");
    }
    report.composite = composite_score(report.function_level.f1, report.stmt_two_phase.f1,
                                       report.stmt_one_phase.f1, report.ranking.top1);
    return report;
}

namespace {

json classification_to_json(const ClassificationMetrics& m) {
    return {{"mcc", m.mcc}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

}  // namespace

std::string report_to_json(const MetricsReport& report) {
    json j;
    j["function_level"] = classification_to_json(report.function_level);
    if (report.has_statement_metrics) {
        j["statement_two_phase"] = classification_to_json(report.stmt_two_phase);
        j["statement_one_phase"] = classification_to_json(report.stmt_one_phase);
        j["ranking"] = {{"top1", report.ranking.top1}, {"top3", report.ranking.top3},
                        {"top5", report.ranking.top5}, {"mfr", report.ranking.mfr},
                        {"mar", report.ranking.mar},   {"functions", report.ranking.functions}};
        j["composite_score"] = report.composite;
    } else {
        j["statement_two_phase"] = nullptr;
        j["statement_one_phase"] = nullptr;
        j["ranking"] = nullptr;
        j["composite_score"] = nullptr;
    }
    j["n_functions"] = report.n_functions;
    j["n_unscored_lines"] = report.n_unscored_lines;
    j["notes"] = report.notes;
    return j.dump(2);
}

namespace {

std::string fmt(double v, int width = 7) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(2) << std::setw(width) << v;
    return ss.str();
}

std::string classification_row(const ClassificationMetrics& m) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(4) << std::setw(7) << m.mcc << " " << fmt(m.precision)
       << " " << fmt(m.recall) << " " << fmt(m.f1);
    return ss.str();
}

}  // namespace

std::string report_to_table(const MetricsReport& report, const std::string& title) {
    std::ostringstream ss;
    ss << title << "\n";
    ss << std::string(title.size(), '=') << "\n\n";
    ss << "Level                      Mcc     Pre      Re      F1\n";
    ss << "Function            " << classification_row(report.function_level) << "\n";
    if (report.has_statement_metrics) {
        ss << "Statement Two-Phase " << classification_row(report.stmt_two_phase) << "\n";
        ss << "Statement One-Phase " << classification_row(report.stmt_one_phase) << "\n\n";
        ss << "Ranking             Top-1    Top-3    Top-5     MFR     MAR\n";
        ss << "                  " << fmt(report.ranking.top1) << "  " << fmt(report.ranking.top3)
           << "  " << fmt(report.ranking.top5) << " " << fmt(report.ranking.mfr) << " "
           << fmt(report.ranking.mar) << "\n\n";
        ss << "Composite Score : " << std::fixed << std::setprecision(3) << report.composite << "\n";
    } else {
        ss << "Statement Two-Phase      --      --      --      --\n";
        ss << "Statement One-Phase      --      --      --      --\n\n";
        ss << "Ranking                  --       --       --      --      --\n";
    }
    for (const auto& note : report.notes) ss << "note: " << note << "\n";
    return ss.str();
}

std::string report_to_csv(const MetricsReport& report) {
    std::ostringstream ss;
    ss << "metric,value\n";
    auto put = [&](const std::string& name, double v) { ss << name << "," << v << "\n"; };
    put("function_mcc", report.function_level.mcc);
    put("function_precision", report.function_level.precision);
    put("function_recall", report.function_level.recall);
    put("function_f1", report.function_level.f1);
    if (report.has_statement_metrics) {
        put("stmt_two_phase_mcc", report.stmt_two_phase.mcc);
        put("stmt_two_phase_f1", report.stmt_two_phase.f1);
        put("stmt_one_phase_mcc", report.stmt_one_phase.mcc);
        put("stmt_one_phase_f1", report.stmt_one_phase.f1);
        put("top1", report.ranking.top1);
        put("top3", report.ranking.top3);
        put("top5", report.ranking.top5);
        put("mfr", report.ranking.mfr);
        put("mar", report.ranking.mar);
        put("composite", report.composite);
    }
    return ss.str();
}

// ---------------------------------------------------------------------------
// Paired t-test via the regularized incomplete beta function.

namespace {

double beta_cont_frac(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-16;
    constexpr double kTiny = 1e-300;

    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                      b * std::log(1.0 - x);
    double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cont_frac(a, b, x) / a;
    return 1.0 - front * beta_cont_frac(b, a, 1.0 - x) / b;
}

TTestResult paired_t_test(const std::vector<double>& runs_a, const std::vector<double>& runs_b) {
    check(runs_a.size() == runs_b.size(), "paired_t_test: runs differ in length");
    check(runs_a.size() >= 2, "paired_t_test: need at least 2 paired samples");

    std::size_t n = runs_a.size();
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += runs_a[i] - runs_b[i];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = runs_a[i] - runs_b[i] - mean;
        var += d * d;
    }
    var /= static_cast<double>(n - 1);

    TTestResult result;
    result.df = static_cast<int>(n) - 1;
    if (var == 0.0) {
        result.degenerate = true;
        result.t = mean == 0.0 ? 0.0 : std::numeric_limits<double>::infinity() * (mean > 0 ? 1 : -1);
        result.p_value = mean == 0.0 ? 1.0 : 0.0;
    } else {
        result.t = mean / std::sqrt(var / static_cast<double>(n));
        double df = static_cast<double>(result.df);
        double x = df / (df + result.t * result.t);
        result.p_value = incomplete_beta(df / 2.0, 0.5, x);
    }
    if (result.p_value < 0.001) result.significance = "***";
    else if (result.p_value < 0.01) result.significance = "**";
    else if (result.p_value < 0.05) result.significance = "*";
    else result.significance = "n.s.";
    return result;
}

}  // namespace dcvd
