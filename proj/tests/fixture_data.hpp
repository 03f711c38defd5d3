#pragma once

#include "dcvd/config.hpp"
#include "dcvd/dataset.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <string>
#include <vector>

namespace dcvd::testing {

/// Synthetic, trivially separable corpus: vulnerable samples call strcpy on a
/// known line, benign samples stay bounds-checked. Half of the samples are
/// positive.
inline std::vector<CodeFunction> fixture_records(int count) {
    std::vector<CodeFunction> records;
    for (int i = 0; i < count; ++i) {
        CodeFunction fn;
        fn.id = "fx" + std::to_string(i);
        bool vulnerable = (i % 2) == 0;
        if (vulnerable) {
            fn.source = "int handler_" + std::to_string(i) + "(char *input) {\n" +
                        "  char buf[16];\n" +
                        "  strcpy(buf, input);\n" +
                        "  return buf[0] + " + std::to_string(i) + ";\n" +
                        "}";
            fn.y_f = 1;
            fn.flaw_lines = {2};
        } else {
            fn.source = "int checker_" + std::to_string(i) + "(char *input, int n) {\n" +
                        "  char buf[16];\n" +
                        "  if (n < 16) { buf[n] = input[0]; }\n" +
                        "  return buf[0] + " + std::to_string(i) + ";\n" +
                        "}";
            fn.y_f = 0;
        }
        fn.n_lines = 5;
        fn.validate();
        records.push_back(std::move(fn));
    }
    return records;
}

/// Structurally varied corpus cycling through loop / switch / pointer /
/// call-chain templates; vulnerable samples still carry one flaw line.
inline std::vector<CodeFunction> varied_records(int count) {
    std::vector<CodeFunction> records;
    for (int i = 0; i < count; ++i) {
        CodeFunction fn;
        fn.id = "vx" + std::to_string(i);
        std::string n = std::to_string(i);
        bool vulnerable = (i % 2) == 0;
        switch (i % 3) {
            case 0:
                fn.source = "int walk_" + n + "(char *p, int n) {\n" +
                            "  int s = 0;\n" +
                            "  for (int i = 0; i < n; i++) {\n" +
                            (vulnerable ? "    s += p[i + 8];\n" : "    if (i < 8) s += p[i];\n") +
                            "  }\n  return s;\n}";
                fn.flaw_lines = vulnerable ? std::set<int>{3} : std::set<int>{};
                break;
            case 1:
                fn.source = "int pick_" + n + "(int mode, char *src) {\n" +
                            "  char out[8];\n" +
                            "  switch (mode) {\n" +
                            "    case 0: return 0;\n" +
                            (vulnerable ? "    case 1: gets(out); break;\n"
                                        : "    case 1: out[0] = src[0]; break;\n") +
                            "    default: break;\n" +
                            "  }\n  return out[0];\n}";
                fn.flaw_lines = vulnerable ? std::set<int>{4} : std::set<int>{};
                break;
            default:
                fn.source = "void relay_" + n + "(struct msg *m) {\n" +
                            "  while (m != 0) {\n" +
                            (vulnerable ? "    sprintf(m->buf, \"%s\", m->src);\n"
                                        : "    snprintf(m->buf, 15, \"%s\", m->src);\n") +
                            "    m = m->next;\n" +
                            "  }\n}";
                fn.flaw_lines = vulnerable ? std::set<int>{2} : std::set<int>{};
                break;
        }
        fn.y_f = vulnerable ? 1 : 0;
        fn.n_lines = static_cast<int>(std::count(fn.source.begin(), fn.source.end(), '\n')) + 1;
        fn.validate();
        records.push_back(std::move(fn));
    }
    return records;
}

/// Splits where everything trains and the same ids are reused for validation
/// and test (the overfit setting).
inline std::array<DatasetSplit, 3> overfit_splits(const std::vector<CodeFunction>& records) {
    std::array<DatasetSplit, 3> splits;
    splits[0].name = "train";
    splits[1].name = "valid";
    splits[2].name = "test";
    for (const auto& r : records) {
        splits[0].sample_ids.push_back(r.id);
        splits[1].sample_ids.push_back(r.id);
        splits[2].sample_ids.push_back(r.id);
    }
    return splits;
}

/// Desk-scale overrides for fast CPU runs. Routed through the override path
/// so run reports log every change from the defaults.
inline std::map<std::string, std::string> small_overrides() {
    return {
        {"embed_dim", "32"}, {"d_h", "32"},        {"d_prime", "32"},     {"d_k", "32"},
        {"enc_hidden", "32"}, {"enc_layers", "1"}, {"enc_heads", "2"},    {"gat_heads", "2"},
        {"stmt_heads", "4"},  {"lr", "3e-3"},      {"warmup_steps", "10"}, {"batch_size", "10"},
        {"epochs", "200"},    {"weight_decay", "0"}, {"max_seq", "128"},
    };
}

inline TrainConfig make_config(const std::map<std::string, std::string>& overrides) {
    TrainConfig config;
    for (const auto& [key, value] : overrides) apply_config_entry(config, key, value);
    return config;
}

}  // namespace dcvd::testing
