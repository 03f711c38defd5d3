#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dcvd/checkpoint.hpp"
#include "dcvd/optim.hpp"
#include "dcvd/trainer.hpp"
#include "fixture_data.hpp"
#include "test_helpers.hpp"

#include <cmath>
#include <filesystem>

using namespace dcvd;
using dcvd::testing::fixture_records;
using dcvd::testing::make_config;
using dcvd::testing::overfit_splits;
using dcvd::testing::small_overrides;

namespace {

std::map<std::string, std::string> quick_overrides(int epochs) {
    auto o = small_overrides();
    o["epochs"] = std::to_string(epochs);
    return o;
}

bool has_param_prefix(const nn::ParamRegistry& reg, const std::string& prefix) {
    for (const auto& [name, p] : reg.all())
        if (name.rfind(prefix, 0) == 0) return true;
    return false;
}

}  // namespace

TEST_CASE("config defaults pin the released configuration values") {
    TrainConfig c;
    CHECK(c.d_prime == 128);
    CHECK(c.d_k == 256);
    CHECK(c.gat_layers == 2);
    CHECK(c.stmt_heads == 8);
    CHECK(c.max_seq == 512);
    CHECK(c.optimizer == "adamw");
    CHECK(c.lr == doctest::Approx(2e-5));
    CHECK(c.lr_schedule == "cosine_restarts");
    CHECK(c.warmup_steps == 500);
    CHECK(c.batch_size == 32);
    CHECK(c.epochs == 50);
    CHECK(c.alpha == doctest::Approx(0.4));
    CHECK(c.beta == doctest::Approx(0.1));
    CHECK(c.tau == doctest::Approx(0.07));
}

TEST_CASE("the shipped default config file matches the in-code defaults exactly") {
    TrainConfig from_file = parse_config_file(std::string(DCVD_SOURCE_DIR) + "/configs/default.cfg");
    CHECK(from_file.overrides.empty());  // nothing in the file deviates from a default
    CHECK(config_to_text(from_file) == config_to_text(TrainConfig{}));
}

TEST_CASE("config file parsing, overrides, round trip, unknown keys") {
    TrainConfig c = parse_config_text("# comment\nalpha = 0.25\n d_k = 64 # tail\n");
    CHECK(c.alpha == doctest::Approx(0.25));
    CHECK(c.d_k == 64);
    REQUIRE(c.overrides.count("alpha") == 1);
    REQUIRE(c.overrides.count("d_k") == 1);
    CHECK(c.overrides.size() == 2);

    // setting a key back to its default clears the override record
    apply_config_entry(c, "alpha", "0.4");
    CHECK(c.overrides.count("alpha") == 0);

    TrainConfig back = parse_config_text(config_to_text(c));
    CHECK(back.d_k == 64);
    CHECK(back.alpha == doctest::Approx(0.4));

    CHECK_THROWS_AS(parse_config_text("no_such_key = 1\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("alpha 0.4\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("variant = wo_everything\n"), std::invalid_argument);
}

TEST_CASE("config validation rejects out-of-range values") {
    auto bad = [](const std::string& key, const std::string& value) {
        TrainConfig c;
        apply_config_entry(c, key, value);
        validate_config(c);
    };
    CHECK_THROWS_AS(bad("alpha", "1.5"), std::invalid_argument);
    CHECK_THROWS_AS(bad("alpha", "-0.1"), std::invalid_argument);
    CHECK_THROWS_AS(bad("tau", "0"), std::invalid_argument);
    CHECK_THROWS_AS(bad("beta", "-1"), std::invalid_argument);
    CHECK_THROWS_AS(bad("d_prime", "0"), std::invalid_argument);
    CHECK_THROWS_AS(bad("d_k", "30"), std::invalid_argument);  // not divisible by stmt_heads
    CHECK_THROWS_AS(bad("batch_size", "0"), std::invalid_argument);
    CHECK_NOTHROW(validate_config(TrainConfig{}));
}

TEST_CASE("variant wiring: parameter sets and call counters") {
    auto records = fixture_records(4);
    auto splits = overfit_splits(records);

    auto build = [&](const std::string& variant) {
        auto overrides = quick_overrides(1);
        if (variant != "full") overrides["variant"] = variant;
        TrainConfig config = make_config(overrides);
        Pipeline pipeline(config);
        PreparedData data = pipeline.prepare(records, splits[0].sample_ids);
        auto model = std::make_unique<DcvdModel>(config, data.semantic_vocab.size(),
                                                 data.node_vocab.size());
        // run one forward so call counters move
        model->forward(data.samples[0]);
        return std::make_tuple(std::move(model), data.graph_extractions);
    };

    SUBCASE("full model owns every component") {
        auto [model, extractions] = build("full");
        CHECK(has_param_prefix(model->params(), "structure."));
        CHECK(has_param_prefix(model->params(), "semantic."));
        CHECK(has_param_prefix(model->params(), "fusion."));
        CHECK(has_param_prefix(model->params(), "supervisor.f_sa"));
        CHECK(extractions == 4);
        CHECK(model->cross_attend_calls() == 1);
    }
    SUBCASE("wo_structure drops the graph path entirely") {
        auto [model, extractions] = build("wo_structure");
        CHECK(!has_param_prefix(model->params(), "structure."));
        CHECK(!has_param_prefix(model->params(), "fusion."));
        CHECK(has_param_prefix(model->params(), "semantic."));
        CHECK(extractions == 0);  // extract_graph never invoked
        CHECK(model->cross_attend_calls() == 0);
    }
    SUBCASE("wo_semantic keeps only the structure branch") {
        auto [model, extractions] = build("wo_semantic");
        CHECK(has_param_prefix(model->params(), "structure."));
        CHECK(!has_param_prefix(model->params(), "semantic."));
        CHECK(!has_param_prefix(model->params(), "fusion."));
        CHECK(extractions == 4);
    }
    SUBCASE("wo_fusion replaces alignment + cross-attention with concat + MLP") {
        auto [model, extractions] = build("wo_fusion");
        CHECK(!has_param_prefix(model->params(), "fusion."));
        CHECK(has_param_prefix(model->params(), "fusion_concat_mlp."));
        CHECK(model->cross_attend_calls() == 0);
        CHECK(extractions == 4);
    }
    SUBCASE("wo_multitask removes the statement head parameters") {
        auto [model, extractions] = build("wo_multitask");
        CHECK(!has_param_prefix(model->params(), "supervisor.f_sa"));
        CHECK(!has_param_prefix(model->params(), "supervisor.g_s"));
        CHECK(!has_param_prefix(model->params(), "supervisor.score"));
        CHECK(has_param_prefix(model->params(), "supervisor.g_f"));
        CHECK(has_param_prefix(model->params(), "fusion."));
    }
}

TEST_CASE("loss breakdown honours the combination identity") {
    auto records = fixture_records(6);
    auto splits = overfit_splits(records);
    TrainConfig config = make_config(quick_overrides(1));
    Pipeline pipeline(config);
    PreparedData data = pipeline.prepare(records, splits[0].sample_ids);
    DcvdModel model(config, data.semantic_vocab.size(), data.node_vocab.size());

    std::vector<const PreparedSample*> batch;
    for (const auto& s : data.samples) batch.push_back(&s);
    DcvdModel::BatchResult r = model.batch_loss(batch);

    const LossBreakdown& b = r.breakdown;
    CHECK(b.has_align_loss);
    CHECK(b.has_statement_loss);
    CHECK(b.l_f >= 0.0);
    CHECK(b.l_s >= 0.0);
    CHECK(b.l_align >= -1e-9);
    double expected = b.alpha * (b.l_f + b.beta * b.l_align) + (1.0 - b.alpha) * b.l_s;
    CHECK(std::abs(b.total - expected) < 1e-9);
    CHECK(b.total == total_loss(b.l_f, b.l_s, b.l_align, b.alpha, b.beta));
}

TEST_CASE("alpha = 1 silences statement gradients: parameter hash is stable") {
    auto records = fixture_records(6);
    auto splits = overfit_splits(records);
    auto overrides = quick_overrides(1);
    overrides["alpha"] = "1.0";
    TrainConfig config = make_config(overrides);
    Pipeline pipeline(config);
    PreparedData data = pipeline.prepare(records, splits[0].sample_ids);
    DcvdModel model(config, data.semantic_vocab.size(), data.node_vocab.size());

    auto stmt_hash = [&] {
        std::string bytes;
        for (const auto& [name, p] : model.params().all()) {
            if (name.rfind("supervisor.f_sa", 0) == 0 || name.rfind("supervisor.g_s", 0) == 0 ||
                name.rfind("supervisor.score", 0) == 0 || name.rfind("supervisor.ln", 0) == 0) {
                const nn::Mat& v = p.value();
                bytes.append(reinterpret_cast<const char*>(v.data()), sizeof(double) * v.size());
            }
        }
        return sha256_hex(bytes);
    };

    std::string before = stmt_hash();
    nn::AdamW opt(nn::AdamW::Options{.weight_decay = 0.01});
    std::vector<const PreparedSample*> batch;
    for (const auto& s : data.samples) batch.push_back(&s);
    for (int step = 0; step < 3; ++step) {
        opt.zero_grad(model.params());
        auto r = model.batch_loss(batch);
        CHECK(!r.breakdown.has_statement_loss);
        nn::backward(r.total);
        opt.step(model.params(), 1e-3);
    }
    CHECK(stmt_hash() == before);
    // and the function head did move
    CHECK(model.params().content_hash() != before);
}

TEST_CASE("training is bit-deterministic given (config, seed, data)") {
    auto records = fixture_records(8);
    auto splits = overfit_splits(records);
    auto overrides = quick_overrides(2);

    auto run = [&] {
        TrainConfig config = make_config(overrides);
        Pipeline pipeline(config);
        return pipeline.train(records, splits);
    };
    TrainResult a = run();
    TrainResult b = run();

    REQUIRE(a.history.size() == b.history.size());
    CHECK(a.history[0].mean_loss == b.history[0].mean_loss);
    CHECK(a.history[0].first_batch.total == b.history[0].first_batch.total);
    CHECK(a.history[0].first_batch.l_f == b.history[0].first_batch.l_f);
    CHECK(report_to_json(a.valid_report) == report_to_json(b.valid_report));

    // different seed moves the first-epoch loss
    auto overrides2 = overrides;
    overrides2["seed"] = "7";
    TrainConfig config2 = make_config(overrides2);
    Pipeline pipeline2(config2);
    TrainResult c = pipeline2.train(records, splits);
    CHECK(c.history[0].mean_loss != a.history[0].mean_loss);
}

TEST_CASE("checkpoint round trip restores parameters and the recorded score") {
    namespace fs = std::filesystem;
    auto records = fixture_records(8);
    auto splits = overfit_splits(records);
    TrainConfig config = make_config(quick_overrides(2));
    Pipeline pipeline(config);
    TrainResult result = pipeline.train(records, splits);

    fs::path path = fs::temp_directory_path() / "dcvd_ckpt_test.bin";
    save_checkpoint(result.best, path.string());
    Checkpoint loaded = load_checkpoint(path.string());

    CHECK(loaded.epoch == result.best.epoch);
    CHECK(loaded.valid_score == result.best.valid_score);  // bit-for-bit
    CHECK(loaded.parameters.size() == result.best.parameters.size());
    for (std::size_t i = 0; i < loaded.parameters.size(); ++i) {
        CHECK(loaded.parameters[i].first == result.best.parameters[i].first);
        CHECK((loaded.parameters[i].second - result.best.parameters[i].second).cwiseAbs().maxCoeff() == 0.0);
    }

    // re-evaluating the restored model reproduces the recorded score exactly
    MetricsReport again = evaluate_checkpoint(loaded, records, splits[1].sample_ids);
    double score = again.has_statement_metrics ? again.composite : again.function_level.f1;
    CHECK(score == loaded.valid_score);
    fs::remove(path);
}

TEST_CASE("init_weights overlays matching parameters before training") {
    namespace fs = std::filesystem;
    auto records = fixture_records(6);
    auto splits = overfit_splits(records);
    TrainConfig config = make_config(quick_overrides(1));
    Pipeline pipeline(config);
    TrainResult donor = pipeline.train(records, splits);
    fs::path path = fs::temp_directory_path() / "dcvd_overlay.bin";
    save_checkpoint(donor.best, path.string());

    PreparedData data = pipeline.prepare(records, splits[0].sample_ids);
    DcvdModel fresh(config, data.semantic_vocab.size(), data.node_vocab.size());
    Checkpoint loaded = load_checkpoint(path.string());
    int n = overlay_parameters(fresh.params(), loaded.parameters);
    CHECK(n == static_cast<int>(loaded.parameters.size()));
    CHECK(fresh.params().content_hash() ==
          sha256_hex([&] {
              std::string bytes;
              for (const auto& [name, v] : loaded.parameters) {
                  bytes += name;
                  bytes.push_back('\0');
                  bytes.append(reinterpret_cast<const char*>(v.data()), sizeof(double) * v.size());
              }
              return bytes;
          }()));

    // a mismatched parameter set loads only the intersection
    auto overrides = quick_overrides(1);
    overrides["variant"] = "wo_structure";
    TrainConfig partial_config = make_config(overrides);
    DcvdModel partial(partial_config, data.semantic_vocab.size(), data.node_vocab.size());
    int loaded_partial = overlay_parameters(partial.params(), loaded.parameters);
    CHECK(loaded_partial > 0);
    CHECK(loaded_partial < n);
    fs::remove(path);
}

TEST_CASE("predict emits a permutation of scored lines, deterministically") {
    namespace fs = std::filesystem;
    auto records = fixture_records(8);
    auto splits = overfit_splits(records);
    TrainConfig config = make_config(quick_overrides(2));
    Pipeline pipeline(config);
    TrainResult result = pipeline.train(records, splits);

    std::string source = "int probe(char *p) {\n  char buf[8];\n  strcpy(buf, p);\n  return buf[0];\n}";
    PredictionBundle bundle = predict_source(result.best, source);
    CHECK(bundle.y_hat_f >= 0.0);
    CHECK(bundle.y_hat_f <= 1.0);

    std::vector<int> order = ranked_lines(bundle);
    std::set<int> scored;
    for (const auto& slot : bundle.lines)
        if (slot.scored) scored.insert(slot.line);
    CHECK(order.size() == scored.size());
    for (int line : order) CHECK(scored.count(line) == 1);

    PredictionBundle bundle2 = predict_source(result.best, source);
    CHECK(bundle.y_hat_f == bundle2.y_hat_f);
    CHECK(ranked_lines(bundle2) == order);

    // single-line function: exactly one ranked line at rank 1
    PredictionBundle single = predict_source(result.best, "int one(){ return 1; }");
    CHECK(ranked_lines(single) == std::vector<int>{0});
}

TEST_CASE("oracle and anti-oracle prediction sets bound the metrics") {
    auto records = fixture_records(10);
    std::vector<FunctionPrediction> oracle_preds, anti_preds;
    for (const auto& r : records) {
        FunctionPrediction p;
        p.id = r.id;
        p.y_true = r.y_f;
        p.flaw_lines = r.flaw_lines;
        for (int l = 0; l < r.n_lines; ++l) {
            LinePrediction lp;
            lp.line = l;
            lp.scored = true;
            lp.prob = r.flaw_lines.count(l) ? 0.99 : 0.01;
            p.lines.push_back(lp);
        }
        p.y_prob = r.y_f ? 0.99 : 0.01;
        oracle_preds.push_back(p);

        FunctionPrediction q = p;
        q.y_prob = 1.0 - p.y_prob;
        for (auto& lp : q.lines) lp.prob = 1.0 - lp.prob;
        anti_preds.push_back(q);
    }

    MetricsReport oracle_report = build_report(oracle_preds);
    CHECK(oracle_report.function_level.f1 == 100.0);
    CHECK(oracle_report.function_level.mcc == 1.0);
    CHECK(oracle_report.stmt_two_phase.f1 == 100.0);
    CHECK(oracle_report.ranking.top1 == 100.0);
    CHECK(oracle_report.ranking.mfr == 1.0);

    MetricsReport anti_report = build_report(anti_preds);
    CHECK(anti_report.function_level.recall == 0.0);
}

TEST_CASE("truncated functions renormalize the statement target over visible lines") {
    auto make_long_fn = [](const std::set<int>& flaws) {
        CodeFunction fn;
        fn.id = "long";
        fn.source = "int big(int a) {\n";
        for (int i = 0; i < 48; ++i) fn.source += "  a += " + std::to_string(i) + ";\n";
        fn.source += "}";
        fn.y_f = 1;
        fn.flaw_lines = flaws;
        fn.n_lines = 50;
        fn.validate();
        return fn;
    };

    auto overrides = quick_overrides(1);
    overrides["max_seq"] = "24";  // tokens run out after the first few lines
    TrainConfig config = make_config(overrides);
    Pipeline pipeline(config);

    SUBCASE("one flaw line survives truncation") {
        std::vector<CodeFunction> records = {make_long_fn({1, 45})};
        PreparedData data = pipeline.prepare(records, {"long"});
        CHECK(data.samples[0].pair.code_truncated);
        DcvdModel model(config, data.semantic_vocab.size(), data.node_vocab.size());
        auto fwd = model.forward(data.samples[0]);
        CHECK(fwd.has_stmt_loss);  // target renormalized onto line 1
        CHECK(fwd.l_s.scalar() >= 0.0);
    }
    SUBCASE("every flaw line truncated away: the sample skips the statement term") {
        std::vector<CodeFunction> records = {make_long_fn({44, 45})};
        PreparedData data = pipeline.prepare(records, {"long"});
        DcvdModel model(config, data.semantic_vocab.size(), data.node_vocab.size());
        auto fwd = model.forward(data.samples[0]);
        CHECK(!fwd.has_stmt_loss);
        std::vector<const PreparedSample*> batch = {&data.samples[0]};
        auto r = model.batch_loss(batch);  // falls back to the function-level terms
        CHECK(!r.breakdown.has_statement_loss);
        CHECK(std::isfinite(r.breakdown.total));
    }
}

TEST_CASE("a random-init model's report equals brute-force recomputation on 50 samples") {
    auto records = fixture_records(50);
    TrainConfig config = make_config(quick_overrides(1));
    Pipeline pipeline(config);
    std::vector<std::string> ids;
    for (const auto& r : records) ids.push_back(r.id);
    PreparedData data = pipeline.prepare(records, ids);
    DcvdModel model(config, data.semantic_vocab.size(), data.node_vocab.size());

    auto preds = Pipeline::collect_predictions(model, data, ids);
    MetricsReport report = build_report(preds);

    // recompute the function level directly from the dumped predictions
    long tp = 0, fp = 0, fn = 0, tn = 0;
    for (const auto& p : preds) {
        bool hat = p.y_prob >= 0.5;
        bool truth = p.y_true == 1;
        tp += hat && truth;
        fp += hat && !truth;
        fn += !hat && truth;
        tn += !hat && !truth;
    }
    ClassificationMetrics direct = classification_metrics({tp, fp, fn, tn});
    CHECK(report.function_level.mcc == direct.mcc);
    CHECK(report.function_level.f1 == direct.f1);
    CHECK(report.n_functions == 50);
    CHECK(report.composite == composite_score(report.function_level.f1, report.stmt_two_phase.f1,
                                              report.stmt_one_phase.f1, report.ranking.top1));
}

TEST_CASE("cache-only provider fails on a cold cache, listing the missing ids") {
    auto records = fixture_records(4);
    auto overrides = quick_overrides(1);
    overrides["provider"] = "cache_only";
    overrides["cache_dir"] = (std::filesystem::temp_directory_path() / "dcvd_empty_cache").string();
    std::filesystem::remove_all(overrides["cache_dir"]);
    TrainConfig config = make_config(overrides);
    Pipeline pipeline(config);
    try {
        pipeline.prepare(records, {records[0].id});
        FAIL("expected a ProviderError");
    } catch (const ProviderError& e) {
        std::string msg = e.what();
        for (const auto& r : records) CHECK(msg.find(r.id) != std::string::npos);
    }
    std::filesystem::remove_all(overrides["cache_dir"]);
}

TEST_CASE("prepare fetches each explanation exactly once, even without a cache") {
    auto records = fixture_records(5);
    Pipeline pipeline(make_config(quick_overrides(1)));  // no cache_dir
    pipeline.prepare(records, {records[0].id, records[1].id});
    CHECK(static_cast<FixtureProvider&>(pipeline.service().provider()).call_count() == 5);
}

TEST_CASE("warm cache serves a cache-only pipeline with zero provider calls") {
    namespace fs = std::filesystem;
    auto records = fixture_records(4);
    fs::path cache = fs::temp_directory_path() / "dcvd_warm_cache";
    fs::remove_all(cache);

    // warm with the fixture provider
    auto overrides = quick_overrides(1);
    overrides["cache_dir"] = cache.string();
    {
        Pipeline pipeline(make_config(overrides));
        PreparedData data = pipeline.prepare(records, {records[0].id});
        CHECK(static_cast<FixtureProvider&>(pipeline.service().provider()).call_count() ==
              static_cast<int>(records.size()));
    }
    // cache-only run succeeds without any provider
    overrides["provider"] = "cache_only";
    {
        Pipeline pipeline(make_config(overrides));
        CHECK_NOTHROW(pipeline.prepare(records, {records[0].id}));
    }
    fs::remove_all(cache);
}

TEST_CASE("varied-template corpus trains through real splits without blowing up") {
    auto records = dcvd::testing::varied_records(30);
    auto splits = make_splits(records, {0.8, 0.1, 0.1}, 5);
    auto overrides = quick_overrides(4);
    TrainConfig config = make_config(overrides);
    Pipeline pipeline(config);
    TrainResult result = pipeline.train(records, splits);

    REQUIRE(result.history.size() == 4);
    for (const auto& e : result.history) CHECK(std::isfinite(e.mean_loss));
    CHECK(result.history.back().mean_loss < result.history.front().mean_loss);

    MetricsReport test_report = evaluate_checkpoint(result.best, records, splits[2].sample_ids);
    CHECK(test_report.n_functions == static_cast<int>(splits[2].sample_ids.size()));
}
