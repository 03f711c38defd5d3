#pragma once

#include "dcvd/config.hpp"
#include "dcvd/dataset.hpp"
#include "dcvd/fusion.hpp"
#include "dcvd/graph.hpp"
#include "dcvd/semantic_encoder.hpp"
#include "dcvd/structure_encoder.hpp"
#include "dcvd/supervisor.hpp"
#include "dcvd/vocab.hpp"

#include <memory>
#include <string>
#include <vector>

namespace dcvd {

/// Everything a sample needs at forward time, computed once up front.
struct PreparedSample {
    CodeFunction fn;
    bool has_graph = false;
    CodeGraph graph;
    std::vector<int> node_kinds;
    std::vector<int> node_tokens;
    TokenizedPair pair;
    std::string explanation;
};

/// The trainable network: both encoder branches, fusion, contextualizer and
/// the two supervision heads, wired per ablation variant.
class DcvdModel {
public:
    DcvdModel(const TrainConfig& config, int semantic_vocab, int node_token_vocab);

    struct SampleForward {
        nn::Tensor function_logit;  // 1 x 1
        double y_prob = 0.0;
        nn::Tensor l_f;
        bool has_stmt_loss = false;
        nn::Tensor l_s;
        bool has_align = false;
        nn::Tensor g_row, c_row;  // 1 x d' pooled globals
        LineScoreResult line_result;
        bool has_line_result = false;
    };

    SampleForward forward(const PreparedSample& sample);

    struct BatchResult {
        nn::Tensor total;  // 1 x 1, on the tape
        LossBreakdown breakdown;
        std::vector<SampleForward> samples;
    };

    BatchResult batch_loss(const std::vector<const PreparedSample*>& batch);

    PredictionBundle predict(const PreparedSample& sample);

    nn::ParamRegistry& params() { return reg_; }
    const nn::ParamRegistry& params() const { return reg_; }
    const TrainConfig& config() const { return config_; }

    bool uses_structure() const { return has_structure_; }
    bool uses_semantic() const { return has_semantic_; }
    bool uses_fusion() const { return has_fusion_; }
    bool uses_statement_head() const { return supervisor_.has_statement_head(); }
    int cross_attend_calls() const { return has_fusion_ ? fusion_.cross_attend_calls() : 0; }

    const StructureEncoder& structure_encoder() const { return structure_; }
    const SemanticEncoder& semantic_encoder() const { return semantic_; }
    const CrossModalFusion& fusion() const { return fusion_; }
    const Supervisor& supervisor() const { return supervisor_; }

private:
    /// Sequence the supervisor operates on, plus its line provenance.
    struct Sequence {
        nn::Tensor features;
        std::vector<double> mask;
        std::vector<int> unit_line;
    };
    Sequence build_sequence(const PreparedSample& sample, SampleForward& out);

    TrainConfig config_;
    nn::ParamRegistry reg_;
    Rng rng_;

    bool has_structure_ = false;
    bool has_semantic_ = false;
    bool has_fusion_ = false;
    bool has_concat_mlp_ = false;

    StructureEncoder structure_;
    SemanticEncoder semantic_;
    CrossModalFusion fusion_;
    nn::Mlp concat_mlp_;  // the fusion-free variant: concatenation + MLP
    Contextualizer contextualizer_;
    Supervisor supervisor_;
};

/// Descending-score line ranking of a prediction (1-based display handled by
/// callers); permutation of the scored lines, ties broken by line index.
std::vector<int> ranked_lines(const PredictionBundle& bundle);

}  // namespace dcvd
