#include "dcvd/nn.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace dcvd::nn {

Mat init_matrix(Eigen::Index rows, Eigen::Index cols, Init init, Rng& rng) {
    Mat m(rows, cols);
    switch (init) {
        case Init::XavierUniform: {
            double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
            for (Eigen::Index i = 0; i < rows; ++i)
                for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-limit, limit);
            break;
        }
        case Init::Normal002:
            for (Eigen::Index i = 0; i < rows; ++i)
                for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = 0.02 * rng.normal();
            break;
        case Init::Zeros:
            m.setZero();
            break;
        case Init::Ones:
            m.setOnes();
            break;
    }
    return m;
}

Tensor ParamRegistry::create(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                             Init init, Rng& rng) {
    if (params_.count(name))
        throw std::invalid_argument("ParamRegistry: duplicate parameter name: " + name);
    Tensor t = Tensor::leaf(init_matrix(rows, cols, init, rng));
    params_.emplace(name, t);
    return t;
}

Tensor& ParamRegistry::at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("ParamRegistry: no parameter named " + name);
    return it->second;
}

const Tensor& ParamRegistry::at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("ParamRegistry: no parameter named " + name);
    return it->second;
}

void ParamRegistry::zero_grads() {
    for (auto& [name, p] : params_) p.clear_grad();
}

std::string ParamRegistry::content_hash() const {
    std::string bytes;
    for (const auto& [name, p] : params_) {
        bytes += name;
        bytes.push_back('\0');
        const Mat& v = p.value();
        bytes.append(reinterpret_cast<const char*>(v.data()), sizeof(double) * v.size());
    }
    return sha256_hex(bytes);
}

// ---------------------------------------------------------------------------

Linear::Linear(ParamRegistry& reg, const std::string& prefix, Eigen::Index in, Eigen::Index out,
               bool bias, Rng& rng)
    : has_bias_(bias) {
    W_ = reg.create(prefix + ".weight", in, out, Init::XavierUniform, rng);
    if (bias) b_ = reg.create(prefix + ".bias", 1, out, Init::Zeros, rng);
}

Tensor Linear::operator()(const Tensor& x) const {
    Tensor y = matmul(x, W_);
    if (has_bias_) y = add_rowvec(y, b_);
    return y;
}

Embedding::Embedding(ParamRegistry& reg, const std::string& name, Eigen::Index vocab,
                     Eigen::Index dim, Rng& rng) {
    table_ = reg.create(name + ".table", vocab, dim, Init::Normal002, rng);
}

LayerNorm::LayerNorm(ParamRegistry& reg, const std::string& prefix, Eigen::Index dim, Rng& rng) {
    gain_ = reg.create(prefix + ".gain", 1, dim, Init::Ones, rng);
    bias_ = reg.create(prefix + ".bias", 1, dim, Init::Zeros, rng);
}

Mlp::Mlp(ParamRegistry& reg, const std::string& prefix, Eigen::Index in, Eigen::Index hidden,
         Eigen::Index out, Act act, Rng& rng)
    : act_(act) {
    l1_ = Linear(reg, prefix + ".l1", in, hidden, true, rng);
    l2_ = Linear(reg, prefix + ".l2", hidden, out, true, rng);
}

Tensor Mlp::operator()(const Tensor& x) const {
    Tensor h = l1_(x);
    switch (act_) {
        case Act::Relu: h = relu(h); break;
        case Act::Tanh: h = tanh_t(h); break;
        case Act::Gelu: h = gelu(h); break;
    }
    return l2_(h);
}

// ---------------------------------------------------------------------------

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const std::vector<double>& key_mask) {
    if (q.cols() != k.cols()) throw std::invalid_argument("attention: query/key width mismatch");
    if (k.rows() != v.rows()) throw std::invalid_argument("attention: key/value length mismatch");
    double inv_scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    Tensor scores = scale(matmul(q, transpose(k)), inv_scale);
    if (!key_mask.empty()) {
        if (static_cast<Eigen::Index>(key_mask.size()) != k.rows())
            throw std::invalid_argument("attention: key mask length mismatch");
        Mat bias(1, k.rows());
        for (Eigen::Index j = 0; j < k.rows(); ++j)
            bias(0, j) = key_mask[static_cast<std::size_t>(j)] > 0.0 ? 0.0 : -1e30;
        scores = add_rowvec(scores, Tensor::constant(bias));
    }
    return matmul(softmax_rows(scores), v);
}

MultiheadSelfAttention::MultiheadSelfAttention(ParamRegistry& reg, const std::string& prefix,
                                               Eigen::Index dim, int heads, Rng& rng) {
    if (heads <= 0 || dim % heads != 0)
        throw std::invalid_argument("MultiheadSelfAttention: dim must divide evenly into heads");
    Eigen::Index hd = dim / heads;
    for (int h = 0; h < heads; ++h) {
        std::string hp = prefix + ".h" + std::to_string(h);
        wq_.emplace_back(reg, hp + ".q", dim, hd, false, rng);
        wk_.emplace_back(reg, hp + ".k", dim, hd, false, rng);
        wv_.emplace_back(reg, hp + ".v", dim, hd, false, rng);
    }
    wo_ = Linear(reg, prefix + ".out", dim, dim, true, rng);
}

Tensor MultiheadSelfAttention::operator()(const Tensor& x, const std::vector<double>& key_mask) const {
    Tensor out;
    for (std::size_t h = 0; h < wq_.size(); ++h) {
        Tensor y = scaled_dot_attention(wq_[h](x), wk_[h](x), wv_[h](x), key_mask);
        out = (h == 0) ? y : concat_cols(out, y);
    }
    return wo_(out);
}

TransformerEncoderLayer::TransformerEncoderLayer(ParamRegistry& reg, const std::string& prefix,
                                                 Eigen::Index dim, int heads, Eigen::Index ff_dim,
                                                 Rng& rng) {
    attn_ = MultiheadSelfAttention(reg, prefix + ".attn", dim, heads, rng);
    ff1_ = Linear(reg, prefix + ".ff1", dim, ff_dim, true, rng);
    ff2_ = Linear(reg, prefix + ".ff2", ff_dim, dim, true, rng);
    ln1_ = LayerNorm(reg, prefix + ".ln1", dim, rng);
    ln2_ = LayerNorm(reg, prefix + ".ln2", dim, rng);
}

Tensor TransformerEncoderLayer::operator()(const Tensor& x, const std::vector<double>& key_mask) const {
    Tensor y = ln1_(add(x, attn_(x, key_mask)));
    Tensor f = ff2_(gelu(ff1_(y)));
    return ln2_(add(y, f));
}

Tensor masked_mean_rows(const Tensor& x, const std::vector<double>& mask) {
    if (static_cast<Eigen::Index>(mask.size()) != x.rows())
        throw std::invalid_argument("masked_mean_rows: mask length mismatch");
    double total = 0.0;
    for (double m : mask) total += m;
    if (total <= 0.0) throw std::invalid_argument("masked_mean_rows: mask selects no rows");
    Mat w(1, x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) w(0, i) = mask[static_cast<std::size_t>(i)] / total;
    return matmul_const_left(w, x);
}

}  // namespace dcvd::nn
