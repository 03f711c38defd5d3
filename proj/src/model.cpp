#include "dcvd/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dcvd {

using nn::Mat;
using nn::Tensor;

DcvdModel::DcvdModel(const TrainConfig& config, int semantic_vocab, int node_token_vocab)
    : config_(config), rng_(config.seed) {
    validate_config(config);

    has_structure_ = config.variant != "wo_structure";
    has_semantic_ = config.variant != "wo_semantic";
    has_fusion_ = (config.variant == "full" || config.variant == "wo_multitask");
    has_concat_mlp_ = config.variant == "wo_fusion";

    if (has_structure_) {
        StructureEncoder::Config sc;
        sc.embed_dim = config.embed_dim;
        sc.d_prime = config.d_prime;
        sc.layers = config.gat_layers;
        sc.heads = config.gat_heads;
        structure_ = StructureEncoder(reg_, "structure", sc, kNodeKindCount, node_token_vocab, rng_);
    }
    if (has_semantic_)
        semantic_ = SemanticEncoder(reg_, "semantic", semantic_vocab, config.d_h, config.d_prime, rng_);
    if (has_fusion_) fusion_ = CrossModalFusion(reg_, "fusion", config.d_prime, rng_);
    if (has_concat_mlp_)
        concat_mlp_ = nn::Mlp(reg_, "fusion_concat_mlp", 2 * config.d_prime, config.d_prime,
                              config.d_prime, nn::Mlp::Act::Tanh, rng_);

    Contextualizer::Config cc;
    cc.d_prime = config.d_prime;
    cc.hidden = config.enc_hidden;
    cc.layers = config.enc_layers;
    cc.heads = config.enc_heads;
    cc.d_k = config.d_k;
    cc.max_seq = config.max_seq;
    contextualizer_ = Contextualizer(reg_, "contextualizer", cc, rng_);

    Supervisor::Config sup;
    sup.d_k = config.d_k;
    sup.stmt_heads = config.stmt_heads;
    sup.statement_head = config.variant != "wo_multitask";
    supervisor_ = Supervisor(reg_, "supervisor", sup, rng_);
}

DcvdModel::Sequence DcvdModel::build_sequence(const PreparedSample& sample, SampleForward& out) {
    Sequence seq;

    Tensor f_s;
    if (has_structure_) {
        if (!sample.has_graph)
            throw std::invalid_argument("model: sample " + sample.fn.id + " lacks a graph");
        Tensor x = structure_.embed_nodes(sample.node_kinds, sample.node_tokens);
        f_s = structure_.encode(x, sample.graph.ast_edges, sample.graph.cfg_edges);
    }

    Tensor f_t;
    if (has_semantic_) {
        f_t = semantic_.encode(sample.pair.code_ids, sample.pair.expl_ids, sample.pair.code_mask,
                               sample.pair.expl_mask);
    }

    if (has_structure_ && has_semantic_) {
        // pooled globals for the alignment objective
        Eigen::Index n = f_s.rows();
        Mat pool = Mat::Constant(1, n, 1.0 / static_cast<double>(n));
        out.g_row = nn::matmul_const_left(pool, f_s);
        out.c_row = nn::masked_mean_rows(f_t, sample.pair.code_mask);
        out.has_align = has_fusion_;
    }

    if (has_fusion_) {
        auto [h_s, h_t] = fusion_.cross_attend(f_s, f_t);
        seq.features = fusion_.merge(h_t, h_s);
        seq.mask = sample.pair.code_mask;
        seq.unit_line = sample.pair.token_line;
    } else if (has_concat_mlp_) {
        Eigen::Index n = f_s.rows(), m = f_t.rows();
        Mat pool = Mat::Constant(1, n, 1.0 / static_cast<double>(n));
        Tensor mean_s = nn::matmul_const_left(pool, f_s);
        Tensor broadcast = nn::matmul_const_left(Mat::Ones(m, 1), mean_s);
        seq.features = concat_mlp_(concat_cols(f_t, broadcast));
        seq.mask = sample.pair.code_mask;
        seq.unit_line = sample.pair.token_line;
    } else if (has_semantic_) {
        seq.features = f_t;
        seq.mask = sample.pair.code_mask;
        seq.unit_line = sample.pair.token_line;
    } else {
        seq.features = f_s;
        seq.mask.assign(static_cast<std::size_t>(f_s.rows()), 1.0);
        seq.unit_line.clear();
        for (const auto& node : sample.graph.nodes) seq.unit_line.push_back(node.line);
    }
    return seq;
}

DcvdModel::SampleForward DcvdModel::forward(const PreparedSample& sample) {
    SampleForward out;
    Sequence seq = build_sequence(sample, out);

    Tensor k = contextualizer_(seq.features, seq.mask);
    out.function_logit = supervisor_.function_logit(k, seq.mask);
    out.y_prob = 1.0 / (1.0 + std::exp(-out.function_logit.scalar()));
    out.l_f = Supervisor::bce_with_logit(out.function_logit, sample.fn.y_f);

    if (supervisor_.has_statement_head()) {
        Tensor k_tilde = supervisor_.refine_tokens(k, seq.mask);
        out.line_result = supervisor_.line_scores(k_tilde, seq.unit_line, sample.fn.n_lines);
        out.has_line_result = true;

        if (sample.fn.y_f == 1 && !sample.fn.flaw_lines.empty()) {
            // renormalize the target over lines that survived truncation
            std::set<int> visible;
            for (int flaw : sample.fn.flaw_lines) {
                if (std::binary_search(out.line_result.scored_lines.begin(),
                                       out.line_result.scored_lines.end(), flaw))
                    visible.insert(flaw);
            }
            if (!visible.empty()) {
                out.l_s = Supervisor::statement_loss(out.line_result, visible);
                out.has_stmt_loss = true;
            }
        }
    }
    return out;
}

DcvdModel::BatchResult DcvdModel::batch_loss(const std::vector<const PreparedSample*>& batch) {
    if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
    BatchResult result;
    result.samples.reserve(batch.size());

    bool want_statement = supervisor_.has_statement_head() && config_.alpha < 1.0;
    std::vector<Tensor> l_f_parts, l_s_parts, g_rows, c_rows;
    for (const PreparedSample* sample : batch) {
        SampleForward fwd = forward(*sample);
        l_f_parts.push_back(fwd.l_f);
        if (want_statement && fwd.has_stmt_loss) l_s_parts.push_back(fwd.l_s);
        if (fwd.has_align) {
            g_rows.push_back(fwd.g_row);
            c_rows.push_back(fwd.c_row);
        }
        result.samples.push_back(std::move(fwd));
    }

    Tensor l_f = mean_all(concat_rows(l_f_parts));

    Tensor l_align;
    bool has_align = !g_rows.empty();
    if (has_align)
        l_align = align_loss(concat_rows(g_rows), concat_rows(c_rows), config_.tau,
                             config_.symmetric_align);

    Tensor l_s;
    bool has_stmt = !l_s_parts.empty();
    if (has_stmt) l_s = mean_all(concat_rows(l_s_parts));

    double alpha = config_.alpha;
    Tensor total;
    if (config_.variant == "wo_multitask") {
        // single-branch supervisor: L = L_f + beta * L_align
        alpha = 1.0;
        total = has_align ? add(l_f, scale(l_align, config_.beta)) : l_f;
    } else {
        Tensor func_term = has_align ? add(l_f, scale(l_align, config_.beta)) : l_f;
        total = scale(func_term, alpha);
        if (has_stmt) total = add(total, scale(l_s, 1.0 - alpha));
    }

    result.breakdown.l_f = l_f.scalar();
    result.breakdown.l_s = has_stmt ? l_s.scalar() : 0.0;
    result.breakdown.l_align = has_align ? l_align.scalar() : 0.0;
    result.breakdown.total = total.scalar();
    result.breakdown.alpha = alpha;
    result.breakdown.beta = config_.beta;
    result.breakdown.has_statement_loss = has_stmt;
    result.breakdown.has_align_loss = has_align;
    result.total = total;
    return result;
}

PredictionBundle DcvdModel::predict(const PreparedSample& sample) {
    SampleForward fwd = forward(sample);
    PredictionBundle bundle;
    bundle.y_hat_f = fwd.y_prob;
    if (fwd.has_line_result) {
        bundle.lines = fwd.line_result.slots;
    } else {
        bundle.lines.resize(static_cast<std::size_t>(sample.fn.n_lines));
        for (int l = 0; l < sample.fn.n_lines; ++l) {
            bundle.lines[static_cast<std::size_t>(l)].line = l;
            bundle.lines[static_cast<std::size_t>(l)].scored = false;
        }
    }
    return bundle;
}

std::vector<int> ranked_lines(const PredictionBundle& bundle) {
    std::vector<const LineScore*> scored;
    for (const auto& slot : bundle.lines)
        if (slot.scored) scored.push_back(&slot);
    std::sort(scored.begin(), scored.end(), [](const LineScore* a, const LineScore* b) {
        if (a->score != b->score) return a->score > b->score;
        return a->line < b->line;
    });
    std::vector<int> out;
    out.reserve(scored.size());
    for (const auto* slot : scored) out.push_back(slot->line);
    return out;
}

}  // namespace dcvd
