#include "dcvd/fusion.hpp"

#include <stdexcept>

namespace dcvd {

using nn::Mat;
using nn::Tensor;

Tensor align_loss(const Tensor& g, const Tensor& c, double tau, bool symmetric) {
    if (g.rows() != c.rows() || g.cols() != c.cols())
        throw std::invalid_argument("align_loss: g and c must have matching shapes");
    if (g.rows() < 1) throw std::invalid_argument("align_loss: batch is empty");
    if (tau <= 0.0) throw std::invalid_argument("align_loss: temperature must be positive");
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
        if (g.value().row(i).norm() == 0.0 || c.value().row(i).norm() == 0.0)
            throw std::invalid_argument("align_loss: zero-norm row " + std::to_string(i));
    }

    Eigen::Index b = g.rows();
    Tensor gn = normalize_rows(g);
    Tensor cn = normalize_rows(c);
    Tensor sims = scale(matmul(gn, transpose(cn)), 1.0 / tau);  // B x B, row i: g_i vs all c_j

    Mat eye = Mat::Identity(b, b);
    Tensor diag_sum = sum_all(mul(log_softmax_rows(sims), Tensor::constant(eye)));
    Tensor loss = scale(diag_sum, -1.0 / static_cast<double>(b));
    if (symmetric) {
        Tensor diag_sum_c = sum_all(mul(log_softmax_rows(transpose(sims)), Tensor::constant(eye)));
        Tensor loss_c = scale(diag_sum_c, -1.0 / static_cast<double>(b));
        loss = scale(add(loss, loss_c), 0.5);
    }
    return loss;
}

CrossModalFusion::CrossModalFusion(nn::ParamRegistry& reg, const std::string& prefix,
                                   Eigen::Index d_prime, Rng& rng) {
    wq_s_ = nn::Linear(reg, prefix + ".wq_s", d_prime, d_prime, false, rng);
    wk_s_ = nn::Linear(reg, prefix + ".wk_s", d_prime, d_prime, false, rng);
    wv_s_ = nn::Linear(reg, prefix + ".wv_s", d_prime, d_prime, false, rng);
    wq_t_ = nn::Linear(reg, prefix + ".wq_t", d_prime, d_prime, false, rng);
    wk_t_ = nn::Linear(reg, prefix + ".wk_t", d_prime, d_prime, false, rng);
    wv_t_ = nn::Linear(reg, prefix + ".wv_t", d_prime, d_prime, false, rng);
    w_m_ = nn::Linear(reg, prefix + ".w_m", 2 * d_prime, d_prime, false, rng);
}

std::pair<Tensor, Tensor> CrossModalFusion::cross_attend(const Tensor& f_s, const Tensor& f_t) const {
    if (f_s.rows() < 1 || f_t.rows() < 1)
        throw std::invalid_argument("cross_attend: empty input");
    if (f_s.cols() != f_t.cols())
        throw std::invalid_argument("cross_attend: branch widths differ (" + std::to_string(f_s.cols()) +
                                    " vs " + std::to_string(f_t.cols()) + ")");
    ++calls_;
    Tensor h_s = nn::scaled_dot_attention(wq_s_(f_s), wk_t_(f_t), wv_t_(f_t), {});
    Tensor h_t = nn::scaled_dot_attention(wq_t_(f_t), wk_s_(f_s), wv_s_(f_s), {});
    return {h_s, h_t};
}

Tensor CrossModalFusion::merge(const Tensor& h_t, const Tensor& h_s) const {
    if (h_s.rows() < 1) throw std::invalid_argument("merge: empty structural features");
    Eigen::Index m = h_t.rows(), n = h_s.rows();
    Mat pool = Mat::Constant(1, n, 1.0 / static_cast<double>(n));
    Tensor h_s_bar = matmul_const_left(pool, h_s);                 // 1 x d'
    Tensor broadcast = matmul_const_left(Mat::Ones(m, 1), h_s_bar);  // M x d'
    return tanh_t(w_m_(concat_cols(h_t, broadcast)));
}

Contextualizer::Contextualizer(nn::ParamRegistry& reg, const std::string& prefix,
                               const Config& config, Rng& rng)
    : config_(config) {
    w_a_ = nn::Linear(reg, prefix + ".w_a", config.d_prime, config.hidden, false, rng);
    for (int l = 0; l < config.layers; ++l)
        layers_.emplace_back(reg, prefix + ".enc.l" + std::to_string(l), config.hidden, config.heads,
                             config.hidden * 4, rng);
    to_dk_ = nn::Linear(reg, prefix + ".to_dk", config.hidden, config.d_k, true, rng);
}

Tensor Contextualizer::operator()(const Tensor& h, const std::vector<double>& mask) const {
    if (h.rows() > config_.max_seq)
        throw std::invalid_argument("contextualize: sequence of length " + std::to_string(h.rows()) +
                                    " exceeds the encoder budget of " + std::to_string(config_.max_seq));
    if (!mask.empty() && static_cast<Eigen::Index>(mask.size()) != h.rows())
        throw std::invalid_argument("contextualize: mask length mismatch");
    Tensor x = w_a_(h);
    for (const auto& layer : layers_) x = layer(x, mask);
    return to_dk_(x);
}

}  // namespace dcvd
