#pragma once

#include "dcvd/checkpoint.hpp"
#include "dcvd/config.hpp"
#include "dcvd/dataset.hpp"
#include "dcvd/explain.hpp"
#include "dcvd/metrics.hpp"
#include "dcvd/model.hpp"

#include <array>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace dcvd {

/// Builds the provider named by the config ("fixture", "live", or the
/// offline "cache_only" which serves hits and fails on misses).
std::shared_ptr<ExplanationProvider> make_provider(const TrainConfig& config);

struct PreparedData {
    std::vector<PreparedSample> samples;
    std::map<std::string, std::size_t> index_by_id;
    Vocabulary semantic_vocab;
    Vocabulary node_vocab;
    int graph_extractions = 0;
};

struct EpochStats {
    int epoch = 0;
    double mean_loss = 0.0;
    LossBreakdown first_batch;
    double valid_score = 0.0;
};

struct TrainResult {
    Checkpoint best;
    std::vector<EpochStats> history;
    MetricsReport valid_report;
    int graph_extractions = 0;
    int epochs_ran = 0;
};

struct TrainControl {
    /// Stop once train-split function F1 and Top-1 both reach 100 (sanity
    /// overfit runs); 0 disables the check.
    bool stop_when_train_perfect = false;
    int check_train_every = 1;
};

class Pipeline {
public:
    explicit Pipeline(TrainConfig config);

    const TrainConfig& config() const { return config_; }
    ExplanationService& service() { return *service_; }

    /// Graph extraction, explanation fetching and tokenization for every
    /// record; vocabularies are built from vocab_ids (normally the train
    /// split) only.
    PreparedData prepare(const std::vector<CodeFunction>& records,
                         const std::vector<std::string>& vocab_ids);

    PreparedData prepare_with_vocabs(const std::vector<CodeFunction>& records,
                                     const Vocabulary& semantic_vocab, const Vocabulary& node_vocab,
                                     const std::map<std::string, std::string>* explanations = nullptr);

    TrainResult train(const std::vector<CodeFunction>& records,
                      const std::array<DatasetSplit, 3>& splits, const TrainControl& control = {});

    static std::vector<FunctionPrediction> collect_predictions(DcvdModel& model,
                                                               const PreparedData& data,
                                                               const std::vector<std::string>& ids);

    static MetricsReport evaluate_model(DcvdModel& model, const PreparedData& data,
                                        const std::vector<std::string>& ids);

private:
    PreparedSample prepare_sample(const CodeFunction& fn, bool want_graph, bool want_semantic,
                                  const Vocabulary& semantic_vocab, const Vocabulary& node_vocab,
                                  const std::string* explanation, int* graph_counter);

    TrainConfig config_;
    std::shared_ptr<ExplanationProvider> provider_;
    std::unique_ptr<ExplanationService> service_;
};

/// Rebuilds the model a checkpoint describes and restores its parameters.
std::unique_ptr<DcvdModel> model_from_checkpoint(const Checkpoint& ckpt);

/// Evaluates a stored checkpoint on the given records/ids.
MetricsReport evaluate_checkpoint(const Checkpoint& ckpt, const std::vector<CodeFunction>& records,
                                  const std::vector<std::string>& ids);

/// End-to-end inference on one function body.
PredictionBundle predict_source(const Checkpoint& ckpt, const std::string& source);

/// Report + config header serialization for run directories.
std::string run_report_json(const MetricsReport& report, const TrainConfig& config);
std::string run_report_text(const MetricsReport& report, const TrainConfig& config,
                            const std::string& title);

}  // namespace dcvd
