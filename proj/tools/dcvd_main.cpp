#include "dcvd/checkpoint.hpp"
#include "dcvd/config.hpp"
#include "dcvd/dataset.hpp"
#include "dcvd/graph.hpp"
#include "dcvd/metrics.hpp"
#include "dcvd/trainer.hpp"
#include "dcvd/util.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string timestamp_tag() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &tm);
    return buf;
}

dcvd::TrainConfig load_config(const std::string& config_path,
                              const std::vector<std::string>& overrides) {
    dcvd::TrainConfig config;
    if (!config_path.empty()) config = dcvd::parse_config_file(config_path);
    for (const auto& kv : overrides) {
        std::size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects key=value, got: " + kv);
        dcvd::apply_config_entry(config, dcvd::trim(kv.substr(0, eq)), dcvd::trim(kv.substr(eq + 1)));
    }
    return config;
}

std::array<dcvd::DatasetSplit, 3> load_splits(const std::string& split_dir) {
    std::array<dcvd::DatasetSplit, 3> splits;
    const char* names[3] = {"train", "valid", "test"};
    for (int i = 0; i < 3; ++i) {
        fs::path p = fs::path(split_dir) / (std::string(names[i]) + ".json");
        splits[static_cast<std::size_t>(i)] =
            dcvd::split_from_manifest_json(dcvd::read_file(p.string()));
    }
    return splits;
}

std::string make_run_dir(const std::string& out_root, std::uint64_t seed) {
    fs::path dir = fs::path(out_root) / (timestamp_tag() + "-seed" + std::to_string(seed));
    fs::create_directories(dir);
    return dir.string();
}

const dcvd::DatasetSplit& split_by_name(const std::array<dcvd::DatasetSplit, 3>& splits,
                                        const std::string& name) {
    for (const auto& s : splits)
        if (s.name == name) return s;
    throw std::invalid_argument("unknown split name: " + name);
}

int run_training(const dcvd::TrainConfig& config, const std::string& data_path,
                 const std::string& split_dir, const std::string& out_root,
                 const std::string& title) {
    auto records = dcvd::load_records(data_path);
    auto splits = load_splits(split_dir);

    dcvd::Pipeline pipeline(config);
    dcvd::TrainResult result = pipeline.train(records, splits);

    std::string run_dir = make_run_dir(out_root, config.seed);
    dcvd::save_checkpoint(result.best, (fs::path(run_dir) / "checkpoint.bin").string());
    dcvd::write_file((fs::path(run_dir) / "config.cfg").string(), dcvd::config_to_text(config));
    dcvd::write_file((fs::path(run_dir) / "report.json").string(),
                     dcvd::run_report_json(result.valid_report, config));
    dcvd::write_file((fs::path(run_dir) / "report.txt").string(),
                     dcvd::run_report_text(result.valid_report, config, title));

    json hist = json::array();
    for (const auto& e : result.history)
        hist.push_back({{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"valid_score", e.valid_score}});
    dcvd::write_file((fs::path(run_dir) / "history.json").string(), hist.dump(2));

    std::cout << dcvd::run_report_text(result.valid_report, config, title) << "\n";
    std::cout << "run directory: " << run_dir << "\n";
    std::cout << "best epoch " << result.best.epoch << ", validation score " << std::fixed
              << result.best.valid_score << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dcvd: dual-channel vulnerability detection and statement-level localization"};
    app.require_subcommand(1);

    std::string config_path, data_path, split_dir, out_root = "runs";
    std::vector<std::string> overrides;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "key=value configuration file");
        cmd->add_option("--set", overrides, "override a config entry (key=value), repeatable");
    };

    // ingest
    auto* ingest = app.add_subcommand("ingest", "validate a JSONL dataset and write split manifests");
    std::string ingest_out = "data";
    double r_train = 0.8, r_valid = 0.1, r_test = 0.1;
    std::uint64_t ingest_seed = 42;
    ingest->add_option("--input", data_path, "JSONL records file")->required();
    ingest->add_option("--out-dir", ingest_out, "output directory");
    ingest->add_option("--train-ratio", r_train);
    ingest->add_option("--valid-ratio", r_valid);
    ingest->add_option("--test-ratio", r_test);
    ingest->add_option("--seed", ingest_seed);

    // explain
    auto* explain = app.add_subcommand("explain", "fetch and cache explanations for every record");
    std::string explain_input;
    int max_in_flight = 4;
    explain->add_option("--input", explain_input, "JSONL records file")->required();
    explain->add_option("--max-in-flight", max_in_flight, "bounded concurrent provider requests");
    add_common(explain);

    // graph
    auto* graph_cmd = app.add_subcommand("graph", "dump the AST/CFG interchange JSON for one source file");
    std::string graph_source;
    graph_cmd->add_option("source", graph_source, "file containing one function")->required();

    // train
    auto* train = app.add_subcommand("train", "train the full model");
    train->add_option("--data", data_path, "JSONL records file")->required();
    train->add_option("--splits", split_dir, "directory holding train/valid/test.json")->required();
    train->add_option("--out", out_root, "run directory root");
    add_common(train);

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    std::string ckpt_path, split_name = "test", csv_path;
    double eval_fraction = 1.0;
    std::uint64_t eval_seed = 1;
    eval->add_option("--checkpoint", ckpt_path)->required();
    eval->add_option("--data", data_path)->required();
    eval->add_option("--splits", split_dir)->required();
    eval->add_option("--split", split_name, "train | valid | test");
    eval->add_option("--fraction", eval_fraction, "evaluate on a deterministic sample of the split");
    eval->add_option("--sample-seed", eval_seed);
    eval->add_option("--csv", csv_path, "also write metrics as CSV");

    // predict
    auto* predict = app.add_subcommand("predict", "rank the lines of one function");
    std::string predict_source_path;
    predict->add_option("--checkpoint", ckpt_path)->required();
    predict->add_option("source", predict_source_path, "file containing one function")->required();

    // ablate
    auto* ablate = app.add_subcommand("ablate", "train and evaluate an ablation variant");
    std::string variant;
    ablate->add_option("--variant", variant, "wo_structure | wo_semantic | wo_fusion | wo_multitask")
        ->required();
    ablate->add_option("--data", data_path)->required();
    ablate->add_option("--splits", split_dir)->required();
    ablate->add_option("--out", out_root, "run directory root");
    add_common(ablate);

    // sweep
    auto* sweep = app.add_subcommand("sweep", "sweep one hyperparameter and emit Score-vs-value CSV");
    std::string sweep_param, sweep_values, sweep_csv = "sweep.csv";
    sweep->add_option("--param", sweep_param, "alpha | d_prime | d_k")->required();
    sweep->add_option("--values", sweep_values, "comma-separated values")->required();
    sweep->add_option("--data", data_path)->required();
    sweep->add_option("--splits", split_dir)->required();
    sweep->add_option("--csv", sweep_csv, "output CSV path");
    add_common(sweep);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) {
            auto records = dcvd::load_records(data_path);
            auto splits = dcvd::make_splits(records, {r_train, r_valid, r_test}, ingest_seed);
            fs::create_directories(ingest_out);
            dcvd::write_file((fs::path(ingest_out) / "records.jsonl").string(),
                             dcvd::serialize_records(records));
            for (const auto& s : splits)
                dcvd::write_file((fs::path(ingest_out) / (s.name + ".json")).string(),
                                 dcvd::split_manifest_json(s, ingest_seed));
            std::cout << "ingested " << records.size() << " records; splits " << splits[0].sample_ids.size()
                      << "/" << splits[1].sample_ids.size() << "/" << splits[2].sample_ids.size() << "\n";
            return 0;
        }
        if (*explain) {
            dcvd::TrainConfig config = load_config(config_path, overrides);
            auto records = dcvd::load_records(explain_input);
            dcvd::Pipeline pipeline(config);
            std::vector<std::pair<std::string, std::string>> items;
            for (const auto& r : records) items.emplace_back(r.id, r.source);
            auto recs = pipeline.service().explain_all(items, max_in_flight);
            int malformed = 0;
            for (const auto& r : recs)
                if (r.malformed) ++malformed;
            std::cout << "explained " << recs.size() << " functions ("
                      << (config.cache_dir.empty() ? "no cache" : "cache: " + config.cache_dir) << ")";
            if (malformed > 0) std::cout << ", " << malformed << " missing section headings";
            std::cout << "\n";
            return 0;
        }
        if (*graph_cmd) {
            std::string source = dcvd::read_file(graph_source);
            std::cout << dcvd::extract_graph(source).to_json() << "\n";
            return 0;
        }
        if (*train) {
            dcvd::TrainConfig config = load_config(config_path, overrides);
            return run_training(config, data_path, split_dir, out_root, "dcvd evaluation (validation split)");
        }
        if (*eval) {
            dcvd::Checkpoint ckpt = dcvd::load_checkpoint(ckpt_path);
            auto records = dcvd::load_records(data_path);
            auto splits = load_splits(split_dir);
            dcvd::DatasetSplit split = split_by_name(splits, split_name);
            if (eval_fraction < 1.0) split = dcvd::sample_fraction(split, eval_fraction, eval_seed);
            dcvd::MetricsReport report = dcvd::evaluate_checkpoint(ckpt, records, split.sample_ids);
            std::cout << dcvd::run_report_text(report, ckpt.config,
                                               "dcvd evaluation (" + split_name + " split)");
            if (!csv_path.empty()) dcvd::write_file(csv_path, dcvd::report_to_csv(report));
            return 0;
        }
        if (*predict) {
            dcvd::Checkpoint ckpt = dcvd::load_checkpoint(ckpt_path);
            std::string source = dcvd::read_file(predict_source_path);
            dcvd::PredictionBundle bundle = dcvd::predict_source(ckpt, source);
            std::cout << "vulnerability probability: " << bundle.y_hat_f << "\n";
            std::vector<int> order = dcvd::ranked_lines(bundle);
            std::vector<std::string> lines = dcvd::split_lines(source);
            std::cout << "ranked lines (most suspicious first):\n";
            int rank = 1;
            for (int line : order) {
                std::cout << "  " << rank++ << ". line " << (line + 1) << "  p="
                          << bundle.lines[static_cast<std::size_t>(line)].prob << "  "
                          << (line < static_cast<int>(lines.size()) ? dcvd::trim(lines[static_cast<std::size_t>(line)]) : "")
                          << "\n";
            }
            return 0;
        }
        if (*ablate) {
            dcvd::TrainConfig config = load_config(config_path, overrides);
            dcvd::apply_config_entry(config, "variant", variant);
            return run_training(config, data_path, split_dir, out_root,
                                "dcvd ablation: " + variant + " (validation split)");
        }
        if (*sweep) {
            dcvd::TrainConfig base = load_config(config_path, overrides);
            auto records = dcvd::load_records(data_path);
            auto splits = load_splits(split_dir);
            std::string csv = "value,score\n";
            std::stringstream vals(sweep_values);
            std::string value;
            while (std::getline(vals, value, ',')) {
                dcvd::TrainConfig config = base;
                dcvd::apply_config_entry(config, sweep_param, dcvd::trim(value));
                dcvd::Pipeline pipeline(config);
                dcvd::TrainResult result = pipeline.train(records, splits);
                double score = result.valid_report.has_statement_metrics
                                   ? result.valid_report.composite
                                   : result.valid_report.function_level.f1;
                csv += dcvd::trim(value) + "," + std::to_string(score) + "\n";
                std::cout << sweep_param << " = " << dcvd::trim(value) << " -> score " << score << "\n";
            }
            dcvd::write_file(sweep_csv, csv);
            std::cout << "wrote " << sweep_csv << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
