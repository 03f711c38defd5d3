#pragma once

#include "dcvd/tensor.hpp"
#include "dcvd/util.hpp"

#include <map>
#include <string>
#include <vector>

namespace dcvd::nn {

enum class Init { XavierUniform, Normal002, Zeros, Ones };

/// Owns the learnable leaves by hierarchical name. Names are stable and
/// sorted, which fixes checkpoint layout and optimizer iteration order.
class ParamRegistry {
public:
    Tensor create(const std::string& name, Eigen::Index rows, Eigen::Index cols, Init init, Rng& rng);
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    bool has(const std::string& name) const { return params_.count(name) > 0; }
    std::size_t size() const { return params_.size(); }
    const std::map<std::string, Tensor>& all() const { return params_; }
    std::map<std::string, Tensor>& all() { return params_; }

    void zero_grads();
    /// SHA-256 over the raw bytes of every parameter, in name order.
    std::string content_hash() const;

private:
    std::map<std::string, Tensor> params_;
};

Mat init_matrix(Eigen::Index rows, Eigen::Index cols, Init init, Rng& rng);

// ---------------------------------------------------------------------------

class Linear {
public:
    Linear() = default;
    Linear(ParamRegistry& reg, const std::string& prefix, Eigen::Index in, Eigen::Index out,
           bool bias, Rng& rng);

    Tensor operator()(const Tensor& x) const;
    Eigen::Index in_dim() const { return W_.rows(); }
    Eigen::Index out_dim() const { return W_.cols(); }

private:
    Tensor W_;  // in x out
    Tensor b_;  // 1 x out, optional
    bool has_bias_ = false;
};

class Embedding {
public:
    Embedding() = default;
    Embedding(ParamRegistry& reg, const std::string& name, Eigen::Index vocab, Eigen::Index dim, Rng& rng);

    Tensor lookup(const std::vector<int>& ids) const { return gather_rows(table_, ids); }
    const Tensor& table() const { return table_; }
    Eigen::Index dim() const { return table_.cols(); }
    Eigen::Index vocab_size() const { return table_.rows(); }

private:
    Tensor table_;
};

class LayerNorm {
public:
    LayerNorm() = default;
    LayerNorm(ParamRegistry& reg, const std::string& prefix, Eigen::Index dim, Rng& rng);
    Tensor operator()(const Tensor& x) const { return layer_norm_rows(x, gain_, bias_, eps_); }

private:
    Tensor gain_, bias_;
    double eps_ = 1e-5;
};

/// Two-layer perceptron, hidden activation fixed at construction.
class Mlp {
public:
    enum class Act { Relu, Tanh, Gelu };
    Mlp() = default;
    Mlp(ParamRegistry& reg, const std::string& prefix, Eigen::Index in, Eigen::Index hidden,
        Eigen::Index out, Act act, Rng& rng);
    Tensor operator()(const Tensor& x) const;

private:
    Linear l1_, l2_;
    Act act_ = Act::Relu;
};

/// softmax(Q K^T / sqrt(d) + mask) V. key_mask: 1 = valid, 0 = padding;
/// masked keys receive exactly zero attention weight. Empty mask = all valid.
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const std::vector<double>& key_mask);

class MultiheadSelfAttention {
public:
    MultiheadSelfAttention() = default;
    MultiheadSelfAttention(ParamRegistry& reg, const std::string& prefix, Eigen::Index dim,
                           int heads, Rng& rng);
    Tensor operator()(const Tensor& x, const std::vector<double>& key_mask) const;
    int heads() const { return static_cast<int>(wq_.size()); }

private:
    std::vector<Linear> wq_, wk_, wv_;
    Linear wo_;
};

/// Post-norm transformer encoder layer: LN(x + MHA), LN(y + FFN).
class TransformerEncoderLayer {
public:
    TransformerEncoderLayer() = default;
    TransformerEncoderLayer(ParamRegistry& reg, const std::string& prefix, Eigen::Index dim,
                            int heads, Eigen::Index ff_dim, Rng& rng);
    Tensor operator()(const Tensor& x, const std::vector<double>& key_mask) const;

private:
    MultiheadSelfAttention attn_;
    Linear ff1_, ff2_;
    LayerNorm ln1_, ln2_;
};

/// Masked mean over rows: sum_i m_i x_i / sum_i m_i. Throws on all-zero mask.
Tensor masked_mean_rows(const Tensor& x, const std::vector<double>& mask);

}  // namespace dcvd::nn
