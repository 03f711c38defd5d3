#include "dcvd/checkpoint.hpp"
#include "dcvd/config.hpp"
#include "dcvd/dataset.hpp"
#include "dcvd/explain.hpp"
#include "dcvd/graph.hpp"
#include "dcvd/metrics.hpp"
#include "dcvd/model.hpp"
#include "dcvd/trainer.hpp"
#include "dcvd/util.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;

namespace {

py::dict record_to_dict(const dcvd::CodeFunction& fn) {
    py::dict d;
    d["id"] = fn.id;
    d["func"] = fn.source;
    d["target"] = fn.y_f;
    d["flaw_line_index"] = std::vector<int>(fn.flaw_lines.begin(), fn.flaw_lines.end());
    d["n_lines"] = fn.n_lines;
    return d;
}

py::dict graph_to_dict(const dcvd::CodeGraph& g) {
    py::list nodes;
    for (const auto& n : g.nodes) {
        py::dict nd;
        nd["kind"] = dcvd::kind_name(n.kind);
        nd["token"] = n.token;
        nd["line"] = n.line;
        nodes.append(nd);
    }
    py::dict d;
    d["nodes"] = nodes;
    d["ast_edges"] = g.ast_edges;
    d["cfg_edges"] = g.cfg_edges;
    return d;
}

py::dict classification_to_dict(const dcvd::ClassificationMetrics& m) {
    py::dict d;
    d["mcc"] = m.mcc;
    d["precision"] = m.precision;
    d["recall"] = m.recall;
    d["f1"] = m.f1;
    return d;
}

py::dict report_to_dict(const dcvd::MetricsReport& r) {
    py::dict d;
    d["function_level"] = classification_to_dict(r.function_level);
    if (r.has_statement_metrics) {
        d["statement_two_phase"] = classification_to_dict(r.stmt_two_phase);
        d["statement_one_phase"] = classification_to_dict(r.stmt_one_phase);
        py::dict rank;
        rank["top1"] = r.ranking.top1;
        rank["top3"] = r.ranking.top3;
        rank["top5"] = r.ranking.top5;
        rank["mfr"] = r.ranking.mfr;
        rank["mar"] = r.ranking.mar;
        d["ranking"] = rank;
        d["composite_score"] = r.composite;
    } else {
        d["statement_two_phase"] = py::none();
        d["statement_one_phase"] = py::none();
        d["ranking"] = py::none();
        d["composite_score"] = py::none();
    }
    d["n_functions"] = r.n_functions;
    return d;
}

dcvd::TrainConfig config_from_overrides(const std::map<std::string, std::string>& overrides) {
    dcvd::TrainConfig config;
    for (const auto& [key, value] : overrides) dcvd::apply_config_entry(config, key, value);
    return config;
}

py::dict bundle_to_dict(const dcvd::PredictionBundle& bundle) {
    py::dict d;
    d["probability"] = bundle.y_hat_f;
    py::list lines;
    for (const auto& slot : bundle.lines) {
        py::dict ld;
        ld["line"] = slot.line + 1;  // 1-based for display
        ld["scored"] = slot.scored;
        if (slot.scored)
            ld["prob"] = slot.prob;
        else
            ld["prob"] = py::none();
        lines.append(ld);
    }
    d["lines"] = lines;
    std::vector<int> order = dcvd::ranked_lines(bundle);
    for (int& line : order) line += 1;
    d["ranked_lines"] = order;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "dcvd: dual-channel vulnerability detection and statement-level localization";

    m.def("load_records", [](const std::string& path) {
        py::list out;
        for (const auto& fn : dcvd::load_records(path)) out.append(record_to_dict(fn));
        return out;
    }, py::arg("path"), "Parse and validate a JSONL dataset.");

    m.def("extract_graph", [](const std::string& source) {
        return graph_to_dict(dcvd::extract_graph(source));
    }, py::arg("source"), "AST and CFG over one shared node set.");

    m.def("explain_fixture", [](const std::string& source) {
        dcvd::FixtureProvider provider;
        return provider.generate(source);
    }, py::arg("source"), "Deterministic offline explanation of a function.");

    m.def("build_prompt", &dcvd::build_prompt, py::arg("source"));

    m.def("classification_metrics", [](long tp, long fp, long fn, long tn) {
        return classification_to_dict(dcvd::classification_metrics({tp, fp, fn, tn}));
    }, py::arg("tp"), py::arg("fp"), py::arg("fn"), py::arg("tn"));

    m.def("composite_score", &dcvd::composite_score, py::arg("func_f1"), py::arg("stmt_two_phase_f1"),
          py::arg("stmt_one_phase_f1"), py::arg("top1"));

    m.def("paired_t_test", [](const std::vector<double>& a, const std::vector<double>& b) {
        dcvd::TTestResult r = dcvd::paired_t_test(a, b);
        py::dict d;
        d["t"] = r.t;
        d["df"] = r.df;
        d["p_value"] = r.p_value;
        d["significance"] = r.significance;
        d["degenerate"] = r.degenerate;
        return d;
    }, py::arg("runs_a"), py::arg("runs_b"));

    m.def("train", [](const std::string& records_path, const std::string& checkpoint_path,
                      const std::map<std::string, std::string>& overrides) {
        dcvd::TrainConfig config = config_from_overrides(overrides);
        auto records = dcvd::load_records(records_path);
        auto splits = dcvd::make_splits(records, {0.8, 0.1, 0.1}, config.seed);
        dcvd::Pipeline pipeline(config);
        dcvd::TrainResult result = pipeline.train(records, splits);
        if (!checkpoint_path.empty()) dcvd::save_checkpoint(result.best, checkpoint_path);
        py::dict d;
        d["epochs_ran"] = result.epochs_ran;
        d["best_epoch"] = result.best.epoch;
        d["valid_score"] = result.best.valid_score;
        d["report"] = report_to_dict(result.valid_report);
        return d;
    }, py::arg("records_path"), py::arg("checkpoint_path") = std::string(),
       py::arg("overrides") = std::map<std::string, std::string>(),
       "Train on a JSONL dataset with 80/10/10 splits; returns the validation report.");

    m.def("evaluate", [](const std::string& checkpoint_path, const std::string& records_path,
                         const std::vector<std::string>& ids) {
        dcvd::Checkpoint ckpt = dcvd::load_checkpoint(checkpoint_path);
        auto records = dcvd::load_records(records_path);
        std::vector<std::string> use_ids = ids;
        if (use_ids.empty())
            for (const auto& r : records) use_ids.push_back(r.id);
        return report_to_dict(dcvd::evaluate_checkpoint(ckpt, records, use_ids));
    }, py::arg("checkpoint_path"), py::arg("records_path"),
       py::arg("ids") = std::vector<std::string>());

    m.def("predict", [](const std::string& checkpoint_path, const std::string& source) {
        dcvd::Checkpoint ckpt = dcvd::load_checkpoint(checkpoint_path);
        return bundle_to_dict(dcvd::predict_source(ckpt, source));
    }, py::arg("checkpoint_path"), py::arg("source"));

    m.attr("__version__") = "0.1.0";
}
