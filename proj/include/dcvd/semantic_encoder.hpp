#pragma once

#include "dcvd/nn.hpp"
#include "dcvd/vocab.hpp"

#include <string>
#include <vector>

namespace dcvd {

/// Masked mean pool over explanation token embeddings: sum_j T_j m_j / sum_j m_j.
nn::Tensor pool_explanation(const nn::Tensor& t, const std::vector<double>& mask);

/// Semantic branch: one shared embedding table produces code embeddings C and
/// explanation embeddings T; the pooled explanation vector is injected into
/// every code position and the result is projected to d'.
class SemanticEncoder {
public:
    SemanticEncoder() = default;
    SemanticEncoder(nn::ParamRegistry& reg, const std::string& prefix, int vocab_size, int d_h,
                    int d_prime, Rng& rng);

    /// F_t[i] = tanh(proj(C_i + t_bar)), with padded rows zeroed.
    nn::Tensor encode(const std::vector<int>& code_ids, const std::vector<int>& expl_ids,
                      const std::vector<double>& code_mask, const std::vector<double>& expl_mask) const;

    const nn::Embedding& embedding() const { return emb_; }
    const nn::Linear& projection() const { return proj_; }

private:
    nn::Embedding emb_;   // shared table for both streams
    nn::Linear proj_;     // d_h -> d'
};

}  // namespace dcvd
