#include "dcvd/supervisor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dcvd {

using nn::Mat;
using nn::Tensor;

double total_loss(double l_f, double l_s, double l_align, double alpha, double beta) {
    if (alpha < 0.0 || alpha > 1.0)
        throw std::invalid_argument("total_loss: alpha must lie in [0, 1]");
    if (beta < 0.0) throw std::invalid_argument("total_loss: beta must be non-negative");
    return alpha * (l_f + beta * l_align) + (1.0 - alpha) * l_s;
}

Supervisor::Supervisor(nn::ParamRegistry& reg, const std::string& prefix, const Config& config,
                       Rng& rng)
    : config_(config) {
    g_f_ = nn::Mlp(reg, prefix + ".g_f", config.d_k, config.d_k, 1, nn::Mlp::Act::Relu, rng);
    if (config.statement_head) {
        f_sa_ = nn::MultiheadSelfAttention(reg, prefix + ".f_sa", config.d_k, config.stmt_heads, rng);
        g_s_ = nn::Mlp(reg, prefix + ".g_s", config.d_k, config.d_k, config.d_k, nn::Mlp::Act::Relu, rng);
        ln_ = nn::LayerNorm(reg, prefix + ".ln", config.d_k, rng);
        w_ = reg.create(prefix + ".score.w", config.d_k, 1, nn::Init::XavierUniform, rng);
    }
}

Tensor Supervisor::function_logit(const Tensor& k, const std::vector<double>& mask) const {
    Tensor pooled = nn::masked_mean_rows(k, mask);  // throws on all-pad mask
    return g_f_(pooled);                            // 1 x 1
}

Tensor Supervisor::bce_with_logit(const Tensor& logit, int y) {
    if (y != 0 && y != 1) throw std::invalid_argument("bce_with_logit: label must be 0 or 1");
    // softplus(z) - y*z, numerically stable for either sign of z
    Tensor loss = nn::softplus(logit);
    if (y == 1) loss = sub(loss, logit);
    return loss;
}

Tensor Supervisor::refine_tokens(const Tensor& k, const std::vector<double>& mask) const {
    if (!config_.statement_head)
        throw std::logic_error("refine_tokens: statement head is disabled in this configuration");
    Tensor refined = g_s_(f_sa_(k, mask));
    return ln_(add(k, refined));
}

LineScoreResult Supervisor::line_scores(const Tensor& k_tilde, const std::vector<int>& token_line,
                                        int n_lines) const {
    if (!config_.statement_head)
        throw std::logic_error("line_scores: statement head is disabled in this configuration");
    if (static_cast<Eigen::Index>(token_line.size()) != k_tilde.rows())
        throw std::invalid_argument("line_scores: token_line length mismatch with K");
    for (int line : token_line) {
        if (line >= n_lines)
            throw std::out_of_range("line_scores: token mapped to line " + std::to_string(line) +
                                    " beyond " + std::to_string(n_lines) + " lines");
    }

    std::vector<std::vector<int>> tokens_of_line(static_cast<std::size_t>(n_lines));
    for (std::size_t i = 0; i < token_line.size(); ++i) {
        if (token_line[i] >= 0) tokens_of_line[static_cast<std::size_t>(token_line[i])].push_back(static_cast<int>(i));
    }

    LineScoreResult result;
    for (int l = 0; l < n_lines; ++l)
        if (!tokens_of_line[static_cast<std::size_t>(l)].empty()) result.scored_lines.push_back(l);

    Tensor token_scores = matmul(k_tilde, w_);  // M x 1

    // per-line means via a constant grouping matrix
    Eigen::Index n_scored = static_cast<Eigen::Index>(result.scored_lines.size());
    result.slots.resize(static_cast<std::size_t>(n_lines));
    for (int l = 0; l < n_lines; ++l) {
        result.slots[static_cast<std::size_t>(l)].line = l;
        result.slots[static_cast<std::size_t>(l)].scored = false;
    }
    if (n_scored == 0) {
        result.scores = Tensor::constant(Mat(0, 1));
        return result;
    }

    Mat group(n_scored, k_tilde.rows());
    group.setZero();
    for (Eigen::Index r = 0; r < n_scored; ++r) {
        const auto& toks = tokens_of_line[static_cast<std::size_t>(result.scored_lines[static_cast<std::size_t>(r)])];
        double inv = 1.0 / static_cast<double>(toks.size());
        for (int tok : toks) group(r, tok) = inv;
    }
    result.scores = nn::matmul_const_left(group, token_scores);  // n_scored x 1

    for (Eigen::Index r = 0; r < n_scored; ++r) {
        int line = result.scored_lines[static_cast<std::size_t>(r)];
        double s = result.scores.value()(r, 0);
        LineScore& slot = result.slots[static_cast<std::size_t>(line)];
        slot.scored = true;
        slot.score = s;
        slot.prob = 1.0 / (1.0 + std::exp(-s));
    }
    return result;
}

Tensor Supervisor::statement_loss(const LineScoreResult& scores, const std::set<int>& flaw_lines) {
    if (flaw_lines.empty())
        throw std::invalid_argument("statement_loss: function has no flaw lines");
    if (scores.scored_lines.empty())
        throw std::invalid_argument("statement_loss: no scored lines");

    Eigen::Index n = static_cast<Eigen::Index>(scores.scored_lines.size());
    Mat target = Mat::Zero(n, 1);
    double p = 1.0 / static_cast<double>(flaw_lines.size());
    for (int flaw : flaw_lines) {
        auto it = std::find(scores.scored_lines.begin(), scores.scored_lines.end(), flaw);
        if (it == scores.scored_lines.end())
            throw std::invalid_argument("statement_loss: flaw line " + std::to_string(flaw) +
                                        " has no score");
        target(it - scores.scored_lines.begin(), 0) = p;
    }

    // KL(p || q) = sum p log p - sum p log q; the first term is -log |flaws|
    Tensor logq = nn::log_softmax_rows(transpose(scores.scores));  // 1 x n
    Tensor cross = nn::matmul_const_right(logq, target);           // 1 x 1
    double entropy_term = -std::log(static_cast<double>(flaw_lines.size()));
    return add_scalar(scale(cross, -1.0), entropy_term);
}

}  // namespace dcvd
