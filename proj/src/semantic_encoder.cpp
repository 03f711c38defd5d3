#include "dcvd/semantic_encoder.hpp"

#include <stdexcept>

namespace dcvd {

using nn::Mat;
using nn::Tensor;

Tensor pool_explanation(const Tensor& t, const std::vector<double>& mask) {
    return nn::masked_mean_rows(t, mask);
}

SemanticEncoder::SemanticEncoder(nn::ParamRegistry& reg, const std::string& prefix, int vocab_size,
                                 int d_h, int d_prime, Rng& rng) {
    emb_ = nn::Embedding(reg, prefix + ".emb", vocab_size, d_h, rng);
    proj_ = nn::Linear(reg, prefix + ".proj", d_h, d_prime, true, rng);
}

Tensor SemanticEncoder::encode(const std::vector<int>& code_ids, const std::vector<int>& expl_ids,
                               const std::vector<double>& code_mask,
                               const std::vector<double>& expl_mask) const {
    if (code_ids.empty()) throw std::invalid_argument("encode_semantic: empty code sequence");
    if (expl_ids.empty()) throw std::invalid_argument("encode_semantic: empty explanation sequence");
    if (code_mask.size() != code_ids.size() || expl_mask.size() != expl_ids.size())
        throw std::invalid_argument("encode_semantic: mask length mismatch");

    Tensor c = emb_.lookup(code_ids);           // M x d_h
    Tensor t = emb_.lookup(expl_ids);           // L x d_h
    Tensor t_bar = pool_explanation(t, expl_mask);  // 1 x d_h

    Tensor injected = add_rowvec(c, t_bar);
    Tensor f_t = tanh_t(proj_(injected));

    // zero padded rows so they carry nothing downstream
    bool any_pad = false;
    for (double m : code_mask)
        if (m <= 0.0) any_pad = true;
    if (any_pad) {
        Mat mask_col(static_cast<Eigen::Index>(code_mask.size()), 1);
        for (std::size_t i = 0; i < code_mask.size(); ++i)
            mask_col(static_cast<Eigen::Index>(i), 0) = code_mask[i] > 0.0 ? 1.0 : 0.0;
        f_t = mul_colvec(f_t, Tensor::constant(mask_col));
    }
    return f_t;
}

}  // namespace dcvd
