#include "dcvd/structure_encoder.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace dcvd {

using nn::Mat;
using nn::Tensor;

std::vector<double> gat_attention(const Mat& x_i, const Mat& neighbors, const Mat& w,
                                  const Mat& a_src, const Mat& a_dst, double leaky_slope) {
    if (neighbors.rows() == 0)
        throw std::invalid_argument("gat_attention: empty neighborhood");
    Mat wxi = x_i * w;  // 1 x dh
    double src_term = (wxi * a_src)(0, 0);
    std::vector<double> logits(static_cast<std::size_t>(neighbors.rows()));
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < neighbors.rows(); ++j) {
        Mat wxj = neighbors.row(j) * w;
        double e = src_term + (wxj * a_dst)(0, 0);
        e = e > 0.0 ? e : leaky_slope * e;
        logits[static_cast<std::size_t>(j)] = e;
        mx = std::max(mx, e);
    }
    double denom = 0.0;
    for (double& v : logits) {
        v = std::exp(v - mx);
        denom += v;
    }
    for (double& v : logits) v /= denom;
    return logits;
}

Mat adjacency_with_self_loops(const std::vector<Edge>& edges, int n) {
    Mat adj = Mat::Identity(n, n);
    for (const auto& [s, d] : edges) {
        if (s < 0 || s >= n || d < 0 || d >= n)
            throw std::out_of_range("adjacency: edge endpoint out of range");
        adj(s, d) = 1.0;
        adj(d, s) = 1.0;
    }
    return adj;
}

GatLayer::GatLayer(nn::ParamRegistry& reg, const std::string& prefix, Eigen::Index in_dim,
                   Eigen::Index out_dim, int heads, double leaky_slope, Rng& rng)
    : slope_(leaky_slope) {
    if (heads <= 0 || out_dim % heads != 0)
        throw std::invalid_argument("GatLayer: out_dim must divide evenly into heads");
    Eigen::Index head_dim = out_dim / heads;
    for (int h = 0; h < heads; ++h) {
        std::string hp = prefix + ".h" + std::to_string(h);
        w_.push_back(reg.create(hp + ".w", in_dim, head_dim, nn::Init::XavierUniform, rng));
        a_src_.push_back(reg.create(hp + ".a_src", head_dim, 1, nn::Init::XavierUniform, rng));
        a_dst_.push_back(reg.create(hp + ".a_dst", head_dim, 1, nn::Init::XavierUniform, rng));
    }
    proj_ = nn::Linear(reg, prefix + ".proj", out_dim, out_dim, false, rng);
}

Tensor GatLayer::operator()(const Tensor& x, const Mat& adjacency) const {
    Eigen::Index n = x.rows();
    if (adjacency.rows() != n || adjacency.cols() != n)
        throw std::invalid_argument("GatLayer: adjacency shape mismatch");

    Mat mask_bias(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) mask_bias(i, j) = adjacency(i, j) > 0.0 ? 0.0 : -1e30;
    Tensor bias = Tensor::constant(mask_bias);
    Mat ones_row = Mat::Ones(1, n);
    Mat ones_col = Mat::Ones(n, 1);

    Tensor out;
    for (std::size_t h = 0; h < w_.size(); ++h) {
        Tensor wx = matmul(x, w_[h]);                       // n x dh
        Tensor s_src = matmul(wx, a_src_[h]);               // n x 1
        Tensor s_dst = matmul(wx, a_dst_[h]);               // n x 1
        Tensor logits = add(matmul_const_right(s_src, ones_row),
                            matmul_const_left(ones_col, transpose(s_dst)));
        Tensor alpha = softmax_rows(add(leaky_relu(logits, slope_), bias));
        Tensor head = matmul(alpha, wx);                    // n x dh
        out = (h == 0) ? head : concat_cols(out, head);
    }
    return elu(proj_(out));
}

Mat GatLayer::attention_matrix(const Mat& x, const Mat& adjacency, int head) const {
    Eigen::Index n = x.rows();
    Mat alpha = Mat::Zero(n, n);
    const Mat& w = w_[static_cast<std::size_t>(head)].value();
    const Mat& asrc = a_src_[static_cast<std::size_t>(head)].value();
    const Mat& adst = a_dst_[static_cast<std::size_t>(head)].value();
    for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<Eigen::Index> nbrs;
        for (Eigen::Index j = 0; j < n; ++j)
            if (adjacency(i, j) > 0.0) nbrs.push_back(j);
        Mat nbr_feats(static_cast<Eigen::Index>(nbrs.size()), x.cols());
        for (std::size_t k = 0; k < nbrs.size(); ++k) nbr_feats.row(static_cast<Eigen::Index>(k)) = x.row(nbrs[k]);
        std::vector<double> weights = gat_attention(x.row(i), nbr_feats, w, asrc, adst, slope_);
        for (std::size_t k = 0; k < nbrs.size(); ++k) alpha(i, nbrs[k]) = weights[k];
    }
    return alpha;
}

// ---------------------------------------------------------------------------

StructureEncoder::StructureEncoder(nn::ParamRegistry& reg, const std::string& prefix,
                                   const Config& config, int kind_vocab, int token_vocab, Rng& rng)
    : config_(config) {
    kind_emb_ = nn::Embedding(reg, prefix + ".kind_emb", kind_vocab, config.embed_dim, rng);
    token_emb_ = nn::Embedding(reg, prefix + ".token_emb", token_vocab, config.embed_dim, rng);
    for (int l = 0; l < config.layers; ++l) {
        Eigen::Index in_dim = (l == 0) ? config.embed_dim : config.d_prime;
        f_a_.emplace_back(reg, prefix + ".gat_ast.l" + std::to_string(l), in_dim, config.d_prime,
                          config.heads, config.leaky_slope, rng);
        f_c_.emplace_back(reg, prefix + ".gat_cfg.l" + std::to_string(l), in_dim, config.d_prime,
                          config.heads, config.leaky_slope, rng);
    }
}

Tensor StructureEncoder::embed_nodes(const std::vector<int>& kind_ids,
                                     const std::vector<int>& token_ids) const {
    if (kind_ids.size() != token_ids.size())
        throw std::invalid_argument("embed_nodes: id sequences differ in length");
    return add(kind_emb_.lookup(kind_ids), token_emb_.lookup(token_ids));
}

Tensor StructureEncoder::run_stack(const Tensor& x, const std::vector<Edge>& edges,
                                   bool ast_stack) const {
    const std::vector<GatLayer>& stack = ast_stack ? f_a_ : f_c_;
    Mat adj = adjacency_with_self_loops(edges, static_cast<int>(x.rows()));
    Tensor h = x;
    for (const GatLayer& layer : stack) h = layer(h, adj);
    return h;
}

Tensor StructureEncoder::encode(const Tensor& x, const std::vector<Edge>& ast_edges,
                                const std::vector<Edge>& cfg_edges) const {
    return add(run_stack(x, ast_edges, true), run_stack(x, cfg_edges, false));
}

std::vector<int> node_kind_ids(const CodeGraph& graph) {
    std::vector<int> ids;
    ids.reserve(graph.nodes.size());
    for (const auto& n : graph.nodes) ids.push_back(static_cast<int>(n.kind));
    return ids;
}

std::vector<int> node_token_ids(const CodeGraph& graph, const Vocabulary& node_vocab) {
    std::vector<int> ids;
    ids.reserve(graph.nodes.size());
    for (const auto& n : graph.nodes) ids.push_back(node_vocab.id_of(n.token));
    return ids;
}

}  // namespace dcvd
