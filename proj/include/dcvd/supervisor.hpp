#pragma once

#include "dcvd/nn.hpp"

#include <set>
#include <string>
#include <vector>

namespace dcvd {

/// Per-line score slot; lines with no tokens carry no score (never a
/// fabricated value).
struct LineScore {
    int line = 0;
    bool scored = false;
    double score = 0.0;  // raw s_l
    double prob = 0.0;   // sigma(s_l), classification only
};

struct PredictionBundle {
    double y_hat_f = 0.0;
    std::vector<LineScore> lines;  // one slot per source line
};

struct LossBreakdown {
    double l_f = 0.0;
    double l_s = 0.0;
    double l_align = 0.0;
    double total = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    bool has_statement_loss = false;
    bool has_align_loss = false;
};

/// Plain-arithmetic form of the training objective:
///   L = alpha * (L_f + beta * L_align) + (1 - alpha) * L_s.
double total_loss(double l_f, double l_s, double l_align, double alpha, double beta);

/// Line aggregation result; scores stay on the tape for the KL loss.
struct LineScoreResult {
    nn::Tensor scores;              // n_scored x 1
    std::vector<int> scored_lines;  // ascending line indices backing `scores`
    std::vector<LineScore> slots;   // one per line, sentinel for token-less lines
};

class Supervisor {
public:
    struct Config {
        int d_k = 256;
        int stmt_heads = 8;
        bool statement_head = true;  // off for the function-level-only variant
    };

    Supervisor() = default;
    Supervisor(nn::ParamRegistry& reg, const std::string& prefix, const Config& config, Rng& rng);

    /// y_hat_f = sigmoid(g_f(masked mean of K)); returns the pre-sigmoid logit.
    nn::Tensor function_logit(const nn::Tensor& k, const std::vector<double>& mask) const;

    /// Binary cross-entropy against y in {0, 1}, computed from the logit.
    static nn::Tensor bce_with_logit(const nn::Tensor& logit, int y);

    /// K_tilde = LN(K + g_s(f_sa(K))).
    nn::Tensor refine_tokens(const nn::Tensor& k, const std::vector<double>& mask) const;

    /// s_l = mean over tokens of line l of w . K_tilde_i; token_line entries of
    /// -1 (specials/padding) belong to no line.
    LineScoreResult line_scores(const nn::Tensor& k_tilde, const std::vector<int>& token_line,
                                int n_lines) const;

    /// KL(uniform-over-flaw-lines || softmax over scored lines). Throws,
    /// naming the line, if a flaw line has no score.
    static nn::Tensor statement_loss(const LineScoreResult& scores, const std::set<int>& flaw_lines);

    bool has_statement_head() const { return config_.statement_head; }

private:
    Config config_;
    nn::Mlp g_f_;                        // d_k -> d_k -> 1
    nn::MultiheadSelfAttention f_sa_;    // 8 heads
    nn::Mlp g_s_;                        // d_k -> d_k -> d_k
    nn::LayerNorm ln_;
    nn::Tensor w_;                       // d_k x 1 score projection
};

}  // namespace dcvd
