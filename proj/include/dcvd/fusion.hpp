#pragma once

#include "dcvd/nn.hpp"

#include <string>
#include <utility>
#include <vector>

namespace dcvd {

/// InfoNCE alignment over a batch of pooled pairs (g_i, c_i), negatives drawn
/// in-batch in the g -> c direction:
///   L = -(1/B) sum_i log softmax_j(cos(g_i, c_j) / tau)[i]
/// `symmetric` adds the c -> g direction and averages the two.
nn::Tensor align_loss(const nn::Tensor& g, const nn::Tensor& c, double tau, bool symmetric = false);

/// Bidirectional single-head cross-attention plus the merge projection.
class CrossModalFusion {
public:
    CrossModalFusion() = default;
    CrossModalFusion(nn::ParamRegistry& reg, const std::string& prefix, Eigen::Index d_prime, Rng& rng);

    /// H_s = softmax(Q_s K_t^T / sqrt(d')) V_t (queries from the structure side),
    /// H_t symmetric. Counts invocations for ablation wiring checks.
    std::pair<nn::Tensor, nn::Tensor> cross_attend(const nn::Tensor& f_s, const nn::Tensor& f_t) const;

    /// H = tanh(W_m [H_t || mean(H_s) broadcast]).
    nn::Tensor merge(const nn::Tensor& h_t, const nn::Tensor& h_s) const;

    int cross_attend_calls() const { return calls_; }
    const nn::Linear& value_projection_t() const { return wv_t_; }
    const nn::Linear& value_projection_s() const { return wv_s_; }

private:
    nn::Linear wq_s_, wk_s_, wv_s_;
    nn::Linear wq_t_, wk_t_, wv_t_;
    nn::Linear w_m_;  // 2d' -> d'
    mutable int calls_ = 0;
};

/// Dimension-aligning projection, multi-layer transformer encoder, final map
/// to d_k. Pad positions never influence valid rows.
class Contextualizer {
public:
    struct Config {
        int d_prime = 128;
        int hidden = 128;
        int layers = 2;
        int heads = 4;
        int d_k = 256;
        int max_seq = 512;
    };

    Contextualizer() = default;
    Contextualizer(nn::ParamRegistry& reg, const std::string& prefix, const Config& config, Rng& rng);

    nn::Tensor operator()(const nn::Tensor& h, const std::vector<double>& mask) const;

private:
    Config config_;
    nn::Linear w_a_;    // d' -> hidden
    std::vector<nn::TransformerEncoderLayer> layers_;
    nn::Linear to_dk_;  // hidden -> d_k
};

}  // namespace dcvd
