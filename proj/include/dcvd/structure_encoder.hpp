#pragma once

#include "dcvd/graph.hpp"
#include "dcvd/nn.hpp"
#include "dcvd/vocab.hpp"

#include <string>
#include <vector>

namespace dcvd {

/// Attention row for one node over its neighborhood:
/// softmax_j leaky_relu(a_src . W x_i + a_dst . W x_j). Plain-double reference
/// path, used standalone and cross-checked against the tensor layer in tests.
/// `neighbors` holds the neighbor feature rows (self included via self-loop).
std::vector<double> gat_attention(const nn::Mat& x_i, const nn::Mat& neighbors, const nn::Mat& w,
                                  const nn::Mat& a_src, const nn::Mat& a_dst, double leaky_slope);

/// Dense 0/1 adjacency from an edge list, made symmetric, with self-loops so
/// every neighborhood is non-empty.
nn::Mat adjacency_with_self_loops(const std::vector<Edge>& edges, int n);

/// One multi-head GAT layer. Heads are concatenated, projected to out_dim,
/// then passed through the output nonlinearity (ELU).
class GatLayer {
public:
    GatLayer() = default;
    GatLayer(nn::ParamRegistry& reg, const std::string& prefix, Eigen::Index in_dim,
             Eigen::Index out_dim, int heads, double leaky_slope, Rng& rng);

    nn::Tensor operator()(const nn::Tensor& x, const nn::Mat& adjacency) const;

    /// Attention matrix of one head at the current parameter values (rows sum
    /// to 1 over the neighborhood).
    nn::Mat attention_matrix(const nn::Mat& x, const nn::Mat& adjacency, int head) const;

    int heads() const { return static_cast<int>(w_.size()); }
    const nn::Tensor& head_weight(int h) const { return w_[static_cast<std::size_t>(h)]; }
    const nn::Tensor& head_attn_src(int h) const { return a_src_[static_cast<std::size_t>(h)]; }
    const nn::Tensor& head_attn_dst(int h) const { return a_dst_[static_cast<std::size_t>(h)]; }
    const nn::Linear& projection() const { return proj_; }
    double leaky_slope() const { return slope_; }

private:
    std::vector<nn::Tensor> w_;      // in_dim x head_dim
    std::vector<nn::Tensor> a_src_;  // head_dim x 1
    std::vector<nn::Tensor> a_dst_;  // head_dim x 1
    nn::Linear proj_;                // heads*head_dim -> out_dim
    double slope_ = 0.2;
};

/// Structure branch: node embeddings, one GAT stack per edge set, summed.
class StructureEncoder {
public:
    struct Config {
        int embed_dim = 128;   // node embedding width d
        int d_prime = 128;     // branch output width d'
        int layers = 2;
        int heads = 4;
        double leaky_slope = 0.2;
    };

    StructureEncoder() = default;
    StructureEncoder(nn::ParamRegistry& reg, const std::string& prefix, const Config& config,
                     int kind_vocab, int token_vocab, Rng& rng);

    /// X: one row per node, kind embedding + token embedding.
    nn::Tensor embed_nodes(const std::vector<int>& kind_ids, const std::vector<int>& token_ids) const;

    /// F_s = f_A(X, E_A) + f_C(X, E_C).
    nn::Tensor encode(const nn::Tensor& x, const std::vector<Edge>& ast_edges,
                      const std::vector<Edge>& cfg_edges) const;

    /// Runs one GAT stack alone (used by tests to check additivity).
    nn::Tensor run_stack(const nn::Tensor& x, const std::vector<Edge>& edges, bool ast_stack) const;

    const std::vector<GatLayer>& ast_stack() const { return f_a_; }
    const std::vector<GatLayer>& cfg_stack() const { return f_c_; }
    const nn::Embedding& kind_embedding() const { return kind_emb_; }
    const nn::Embedding& token_embedding() const { return token_emb_; }

private:
    Config config_;
    nn::Embedding kind_emb_, token_emb_;
    std::vector<GatLayer> f_a_, f_c_;
};

/// Graph-side id sequences for the embedding tables.
std::vector<int> node_kind_ids(const CodeGraph& graph);
std::vector<int> node_token_ids(const CodeGraph& graph, const Vocabulary& node_vocab);

}  // namespace dcvd
