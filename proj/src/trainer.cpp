#include "dcvd/trainer.hpp"

#include "dcvd/optim.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dcvd {

using nlohmann::json;

namespace {

/// Offline provider that only ever serves from cache (the service answers
/// hits before consulting the provider, so reaching this is a miss).
class CacheOnlyProvider : public ExplanationProvider {
public:
    std::string name() const override { return "live"; }
    std::string generate(const std::string&) override {
        throw ProviderError("cache-only mode: explanation not cached");
    }
};

}  // namespace

std::shared_ptr<ExplanationProvider> make_provider(const TrainConfig& config) {
    if (config.provider == "fixture") return std::make_shared<FixtureProvider>();
    if (config.provider == "cache_only") return std::make_shared<CacheOnlyProvider>();
    HttpProvider::Options opts;
    opts.base_url = config.base_url;
    opts.model = config.model_name;
    opts.api_key_env = config.api_key_env;
    return std::make_shared<HttpProvider>(opts);
}

Pipeline::Pipeline(TrainConfig config) : config_(std::move(config)) {
    validate_config(config_);
    provider_ = make_provider(config_);
    service_ = std::make_unique<ExplanationService>(provider_, config_.cache_dir);
}

PreparedSample Pipeline::prepare_sample(const CodeFunction& fn, bool want_graph, bool want_semantic,
                                        const Vocabulary& semantic_vocab, const Vocabulary& node_vocab,
                                        const std::string* explanation, int* graph_counter) {
    PreparedSample sample;
    sample.fn = fn;
    if (want_graph) {
        sample.graph = extract_graph(fn.source);
        sample.has_graph = true;
        if (graph_counter) ++(*graph_counter);
        sample.node_kinds = node_kind_ids(sample.graph);
        sample.node_tokens = node_token_ids(sample.graph, node_vocab);
    }
    if (want_semantic) {
        sample.explanation = explanation ? *explanation : service_->explain(fn.id, fn.source).text;
        sample.pair = tokenize_pair(fn.source, sample.explanation, semantic_vocab, config_.max_seq);
    }
    return sample;
}

PreparedData Pipeline::prepare(const std::vector<CodeFunction>& records,
                               const std::vector<std::string>& vocab_ids) {
    bool want_graph = config_.variant != "wo_structure";
    bool want_semantic = config_.variant != "wo_semantic";

    std::map<std::string, const CodeFunction*> by_id;
    for (const auto& r : records) by_id[r.id] = &r;

    // explanations for the vocabulary basis, collected first so cache-only
    // misses surface as one aggregated error
    std::vector<std::string> missing;
    std::map<std::string, std::string> explanations;
    if (want_semantic) {
        for (const auto& r : records) {
            try {
                explanations[r.id] = service_->explain(r.id, r.source).text;
            } catch (const ProviderError&) {
                missing.push_back(r.id);
            }
        }
        if (!missing.empty()) {
            std::string ids;
            for (const auto& id : missing) ids += (ids.empty() ? "" : ", ") + id;
            throw ProviderError("missing explanations for: " + ids);
        }
    }

    Vocabulary semantic_vocab, node_vocab;
    for (const auto& id : vocab_ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw std::invalid_argument("prepare: unknown sample id " + id);
        const CodeFunction& fn = *it->second;
        if (want_semantic) {
            semantic_vocab.add_terms(code_terms(fn.source));
            semantic_vocab.add_terms(text_terms(explanations.at(fn.id)));
        }
        if (want_graph) {
            CodeGraph g = extract_graph(fn.source);
            std::vector<std::string> tokens;
            for (const auto& node : g.nodes) tokens.push_back(node.token);
            node_vocab.add_terms(tokens);
        }
    }
    semantic_vocab.finalize(static_cast<std::size_t>(config_.max_vocab));
    node_vocab.finalize(static_cast<std::size_t>(config_.max_vocab));

    return prepare_with_vocabs(records, semantic_vocab, node_vocab,
                               want_semantic ? &explanations : nullptr);
}

PreparedData Pipeline::prepare_with_vocabs(const std::vector<CodeFunction>& records,
                                           const Vocabulary& semantic_vocab,
                                           const Vocabulary& node_vocab,
                                           const std::map<std::string, std::string>* explanations) {
    bool want_graph = config_.variant != "wo_structure";
    bool want_semantic = config_.variant != "wo_semantic";

    PreparedData data;
    data.semantic_vocab = semantic_vocab;
    data.node_vocab = node_vocab;
    for (const auto& r : records) {
        data.index_by_id[r.id] = data.samples.size();
        const std::string* text = nullptr;
        if (explanations) {
            auto it = explanations->find(r.id);
            if (it != explanations->end()) text = &it->second;
        }
        data.samples.push_back(prepare_sample(r, want_graph, want_semantic, data.semantic_vocab,
                                              data.node_vocab, text, &data.graph_extractions));
    }
    return data;
}

std::vector<FunctionPrediction> Pipeline::collect_predictions(DcvdModel& model,
                                                              const PreparedData& data,
                                                              const std::vector<std::string>& ids) {
    std::vector<FunctionPrediction> preds;
    preds.reserve(ids.size());
    for (const auto& id : ids) {
        auto it = data.index_by_id.find(id);
        if (it == data.index_by_id.end())
            throw std::invalid_argument("evaluate: split references unknown sample id " + id);
        const PreparedSample& sample = data.samples[it->second];
        PredictionBundle bundle = model.predict(sample);

        FunctionPrediction p;
        p.id = id;
        p.y_true = sample.fn.y_f;
        p.y_prob = bundle.y_hat_f;
        p.flaw_lines = sample.fn.flaw_lines;
        for (const auto& slot : bundle.lines) {
            LinePrediction lp;
            lp.line = slot.line;
            lp.scored = slot.scored;
            lp.prob = slot.prob;
            p.lines.push_back(lp);
        }
        preds.push_back(std::move(p));
    }
    return preds;
}

MetricsReport Pipeline::evaluate_model(DcvdModel& model, const PreparedData& data,
                                       const std::vector<std::string>& ids) {
    std::vector<FunctionPrediction> preds = collect_predictions(model, data, ids);
    return build_report(preds, model.uses_statement_head());
}

TrainResult Pipeline::train(const std::vector<CodeFunction>& records,
                            const std::array<DatasetSplit, 3>& splits, const TrainControl& control) {
    PreparedData data = prepare(records, splits[0].sample_ids);

    DcvdModel model(config_, data.semantic_vocab.size(), data.node_vocab.size());
    if (!config_.init_weights.empty()) {
        Checkpoint warm = load_checkpoint(config_.init_weights);
        overlay_parameters(model.params(), warm.parameters);
    }
    nn::AdamW::Options opt_opts;
    opt_opts.weight_decay = config_.weight_decay;
    nn::AdamW optimizer(opt_opts);

    const std::vector<std::string>& train_ids = splits[0].sample_ids;
    if (train_ids.empty()) throw std::invalid_argument("train: empty train split");
    std::int64_t steps_per_epoch =
        (static_cast<std::int64_t>(train_ids.size()) + config_.batch_size - 1) / config_.batch_size;
    std::int64_t total_steps = steps_per_epoch * config_.epochs;

    TrainResult result;
    result.graph_extractions = data.graph_extractions;
    double best_score = -1.0;
    std::int64_t step = 0;

    for (int epoch = 0; epoch < config_.epochs; ++epoch) {
        std::vector<std::string> order = train_ids;
        Rng epoch_rng(config_.seed + 0x9E37 * static_cast<std::uint64_t>(epoch + 1));
        epoch_rng.shuffle(order);

        EpochStats stats;
        stats.epoch = epoch;
        double loss_sum = 0.0;
        int batches = 0;

        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config_.batch_size)) {
            std::vector<const PreparedSample*> batch;
            for (std::size_t i = start;
                 i < std::min(order.size(), start + static_cast<std::size_t>(config_.batch_size)); ++i)
                batch.push_back(&data.samples[data.index_by_id.at(order[i])]);

            optimizer.zero_grad(model.params());
            DcvdModel::BatchResult br = model.batch_loss(batch);
            if (!std::isfinite(br.breakdown.total))
                throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch));
            nn::backward(br.total);
            double lr = nn::lr_schedule(config_.lr, step, total_steps, config_.warmup_steps,
                                        config_.lr_cycles);
            optimizer.step(model.params(), lr);
            ++step;

            loss_sum += br.breakdown.total;
            if (batches == 0) stats.first_batch = br.breakdown;
            ++batches;
        }
        stats.mean_loss = loss_sum / std::max(batches, 1);

        // validation selection score: composite when statement metrics exist,
        // function F1 otherwise
        const std::vector<std::string>& valid_ids =
            splits[1].sample_ids.empty() ? splits[0].sample_ids : splits[1].sample_ids;
        MetricsReport valid_report = evaluate_model(model, data, valid_ids);
        stats.valid_score = valid_report.has_statement_metrics ? valid_report.composite
                                                               : valid_report.function_level.f1;
        result.history.push_back(stats);
        result.epochs_ran = epoch + 1;

        if (stats.valid_score > best_score) {
            best_score = stats.valid_score;
            result.best.config = config_;
            result.best.semantic_terms = data.semantic_vocab.terms();
            result.best.node_token_terms = data.node_vocab.terms();
            result.best.epoch = epoch;
            result.best.valid_score = stats.valid_score;
            result.best.parameters = snapshot_parameters(model.params());
            result.valid_report = valid_report;
        }

        if (control.stop_when_train_perfect &&
            (epoch % std::max(control.check_train_every, 1)) == 0) {
            MetricsReport train_report = evaluate_model(model, data, splits[0].sample_ids);
            bool perfect = train_report.function_level.f1 >= 100.0 - 1e-9;
            if (train_report.has_statement_metrics)
                perfect = perfect && train_report.ranking.top1 >= 100.0 - 1e-9;
            if (perfect) {
                // keep the final weights; they are the ones that reached 100
                result.best.config = config_;
                result.best.semantic_terms = data.semantic_vocab.terms();
                result.best.node_token_terms = data.node_vocab.terms();
                result.best.epoch = epoch;
                result.best.valid_score = stats.valid_score;
                result.best.parameters = snapshot_parameters(model.params());
                result.valid_report = evaluate_model(model, data, valid_ids);
                break;
            }
        }
    }

    if (result.best.parameters.empty())
        throw std::runtime_error("train: no epoch produced a checkpoint");
    return result;
}

std::unique_ptr<DcvdModel> model_from_checkpoint(const Checkpoint& ckpt) {
    auto model = std::make_unique<DcvdModel>(ckpt.config,
                                             static_cast<int>(ckpt.semantic_terms.size()),
                                             static_cast<int>(ckpt.node_token_terms.size()));
    restore_parameters(model->params(), ckpt.parameters);
    return model;
}

MetricsReport evaluate_checkpoint(const Checkpoint& ckpt, const std::vector<CodeFunction>& records,
                                  const std::vector<std::string>& ids) {
    Pipeline pipeline(ckpt.config);
    PreparedData data = pipeline.prepare_with_vocabs(records, Vocabulary::from_terms(ckpt.semantic_terms),
                                                     Vocabulary::from_terms(ckpt.node_token_terms));
    auto model = model_from_checkpoint(ckpt);
    return Pipeline::evaluate_model(*model, data, ids);
}

PredictionBundle predict_source(const Checkpoint& ckpt, const std::string& source) {
    CodeFunction fn;
    fn.id = "predict";
    fn.source = source;
    fn.y_f = 0;
    fn.n_lines = static_cast<int>(split_lines(source).size());
    fn.validate();

    Pipeline pipeline(ckpt.config);
    PreparedData data = pipeline.prepare_with_vocabs({fn}, Vocabulary::from_terms(ckpt.semantic_terms),
                                                     Vocabulary::from_terms(ckpt.node_token_terms));
    auto model = model_from_checkpoint(ckpt);
    return model->predict(data.samples[0]);
}

std::string run_report_json(const MetricsReport& report, const TrainConfig& config) {
    json j;
    j["config_overrides"] = json::object();
    for (const auto& [key, value] : config.overrides) j["config_overrides"][key] = value;
    j["variant"] = config.variant;
    j["seed"] = config.seed;
    j["metrics"] = json::parse(report_to_json(report));
    return j.dump(2);
}

std::string run_report_text(const MetricsReport& report, const TrainConfig& config,
                            const std::string& title) {
    std::ostringstream ss;
    ss << report_to_table(report, title);
    ss << "\nvariant : " << config.variant << "\nseed    : " << config.seed << "\n";
    for (const auto& [key, value] : config.overrides)
        ss << "override: " << key << " = " << value << "\n";
    return ss.str();
}

}  // namespace dcvd
