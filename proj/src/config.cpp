#include "dcvd/config.hpp"

#include "dcvd/util.hpp"

#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace dcvd {

namespace {

struct Field {
    std::function<std::string(const TrainConfig&)> get;
    std::function<void(TrainConfig&, const std::string&)> set;
};

int to_int(const std::string& v) { return std::stoi(v); }
double to_double(const std::string& v) { return std::stod(v); }
std::uint64_t to_u64(const std::string& v) { return std::stoull(v); }
bool to_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("config: not a boolean: " + v);
}

std::string dbl(double v) {
    std::ostringstream ss;
    ss << v;
    return ss.str();
}

const std::vector<std::pair<std::string, Field>>& fields() {
    static const std::vector<std::pair<std::string, Field>> f = {
        {"d_prime", {[](const TrainConfig& c) { return std::to_string(c.d_prime); },
                     [](TrainConfig& c, const std::string& v) { c.d_prime = to_int(v); }}},
        {"d_k", {[](const TrainConfig& c) { return std::to_string(c.d_k); },
                 [](TrainConfig& c, const std::string& v) { c.d_k = to_int(v); }}},
        {"gat_layers", {[](const TrainConfig& c) { return std::to_string(c.gat_layers); },
                        [](TrainConfig& c, const std::string& v) { c.gat_layers = to_int(v); }}},
        {"gat_heads", {[](const TrainConfig& c) { return std::to_string(c.gat_heads); },
                       [](TrainConfig& c, const std::string& v) { c.gat_heads = to_int(v); }}},
        {"stmt_heads", {[](const TrainConfig& c) { return std::to_string(c.stmt_heads); },
                        [](TrainConfig& c, const std::string& v) { c.stmt_heads = to_int(v); }}},
        {"max_seq", {[](const TrainConfig& c) { return std::to_string(c.max_seq); },
                     [](TrainConfig& c, const std::string& v) { c.max_seq = to_int(v); }}},
        {"embed_dim", {[](const TrainConfig& c) { return std::to_string(c.embed_dim); },
                       [](TrainConfig& c, const std::string& v) { c.embed_dim = to_int(v); }}},
        {"d_h", {[](const TrainConfig& c) { return std::to_string(c.d_h); },
                 [](TrainConfig& c, const std::string& v) { c.d_h = to_int(v); }}},
        {"enc_layers", {[](const TrainConfig& c) { return std::to_string(c.enc_layers); },
                        [](TrainConfig& c, const std::string& v) { c.enc_layers = to_int(v); }}},
        {"enc_heads", {[](const TrainConfig& c) { return std::to_string(c.enc_heads); },
                       [](TrainConfig& c, const std::string& v) { c.enc_heads = to_int(v); }}},
        {"enc_hidden", {[](const TrainConfig& c) { return std::to_string(c.enc_hidden); },
                        [](TrainConfig& c, const std::string& v) { c.enc_hidden = to_int(v); }}},
        {"optimizer", {[](const TrainConfig& c) { return c.optimizer; },
                       [](TrainConfig& c, const std::string& v) { c.optimizer = v; }}},
        {"lr", {[](const TrainConfig& c) { return dbl(c.lr); },
                [](TrainConfig& c, const std::string& v) { c.lr = to_double(v); }}},
        {"lr_schedule", {[](const TrainConfig& c) { return c.lr_schedule; },
                         [](TrainConfig& c, const std::string& v) { c.lr_schedule = v; }}},
        {"warmup_steps", {[](const TrainConfig& c) { return std::to_string(c.warmup_steps); },
                          [](TrainConfig& c, const std::string& v) { c.warmup_steps = to_int(v); }}},
        {"batch_size", {[](const TrainConfig& c) { return std::to_string(c.batch_size); },
                        [](TrainConfig& c, const std::string& v) { c.batch_size = to_int(v); }}},
        {"epochs", {[](const TrainConfig& c) { return std::to_string(c.epochs); },
                    [](TrainConfig& c, const std::string& v) { c.epochs = to_int(v); }}},
        {"alpha", {[](const TrainConfig& c) { return dbl(c.alpha); },
                   [](TrainConfig& c, const std::string& v) { c.alpha = to_double(v); }}},
        {"beta", {[](const TrainConfig& c) { return dbl(c.beta); },
                  [](TrainConfig& c, const std::string& v) { c.beta = to_double(v); }}},
        {"tau", {[](const TrainConfig& c) { return dbl(c.tau); },
                 [](TrainConfig& c, const std::string& v) { c.tau = to_double(v); }}},
        {"weight_decay", {[](const TrainConfig& c) { return dbl(c.weight_decay); },
                          [](TrainConfig& c, const std::string& v) { c.weight_decay = to_double(v); }}},
        {"lr_cycles", {[](const TrainConfig& c) { return std::to_string(c.lr_cycles); },
                       [](TrainConfig& c, const std::string& v) { c.lr_cycles = to_int(v); }}},
        {"seed", {[](const TrainConfig& c) { return std::to_string(c.seed); },
                  [](TrainConfig& c, const std::string& v) { c.seed = to_u64(v); }}},
        {"symmetric_align", {[](const TrainConfig& c) { return c.symmetric_align ? "true" : "false"; },
                             [](TrainConfig& c, const std::string& v) { c.symmetric_align = to_bool(v); }}},
        {"variant", {[](const TrainConfig& c) { return c.variant; },
                     [](TrainConfig& c, const std::string& v) {
                         if (!is_known_variant(v))
                             throw std::invalid_argument("config: unknown variant: " + v);
                         c.variant = v;
                     }}},
        {"init_weights", {[](const TrainConfig& c) { return c.init_weights; },
                          [](TrainConfig& c, const std::string& v) { c.init_weights = v; }}},
        {"max_vocab", {[](const TrainConfig& c) { return std::to_string(c.max_vocab); },
                       [](TrainConfig& c, const std::string& v) { c.max_vocab = to_int(v); }}},
        {"provider", {[](const TrainConfig& c) { return c.provider; },
                      [](TrainConfig& c, const std::string& v) {
                          if (v != "fixture" && v != "live" && v != "cache_only")
                              throw std::invalid_argument(
                                  "config: provider must be fixture, live or cache_only");
                          c.provider = v;
                      }}},
        {"cache_dir", {[](const TrainConfig& c) { return c.cache_dir; },
                       [](TrainConfig& c, const std::string& v) { c.cache_dir = v; }}},
        {"base_url", {[](const TrainConfig& c) { return c.base_url; },
                      [](TrainConfig& c, const std::string& v) { c.base_url = v; }}},
        {"model_name", {[](const TrainConfig& c) { return c.model_name; },
                        [](TrainConfig& c, const std::string& v) { c.model_name = v; }}},
        {"api_key_env", {[](const TrainConfig& c) { return c.api_key_env; },
                         [](TrainConfig& c, const std::string& v) { c.api_key_env = v; }}},
    };
    return f;
}

const Field* find_field(const std::string& key) {
    for (const auto& [name, field] : fields())
        if (name == key) return &field;
    return nullptr;
}

}  // namespace

void validate_config(const TrainConfig& c) {
    check(c.d_prime > 0 && c.d_k > 0 && c.embed_dim > 0 && c.d_h > 0 && c.enc_hidden > 0,
          "config: model dimensions must be positive");
    check(c.gat_layers > 0 && c.gat_heads > 0 && c.stmt_heads > 0 && c.enc_layers > 0 &&
              c.enc_heads > 0,
          "config: layer and head counts must be positive");
    check(c.d_prime % c.gat_heads == 0, "config: d_prime must divide evenly into gat_heads");
    check(c.d_k % c.stmt_heads == 0, "config: d_k must divide evenly into stmt_heads");
    check(c.enc_hidden % c.enc_heads == 0, "config: enc_hidden must divide evenly into enc_heads");
    check(c.max_seq >= 2, "config: max_seq must be at least 2");
    check(c.alpha >= 0.0 && c.alpha <= 1.0, "config: alpha must lie in [0, 1]");
    check(c.beta >= 0.0, "config: beta must be non-negative");
    check(c.tau > 0.0, "config: tau must be positive");
    check(c.lr > 0.0, "config: lr must be positive");
    check(c.weight_decay >= 0.0, "config: weight_decay must be non-negative");
    check(c.warmup_steps >= 0, "config: warmup_steps must be non-negative");
    check(c.batch_size >= 1 && c.epochs >= 1, "config: batch_size and epochs must be positive");
    check(c.max_vocab > 3, "config: max_vocab must exceed the reserved tokens");
    check(is_known_variant(c.variant), "config: unknown variant: " + c.variant);
}

bool is_known_variant(const std::string& variant) {
    return variant == "full" || variant == "wo_structure" || variant == "wo_semantic" ||
           variant == "wo_fusion" || variant == "wo_multitask";
}

void apply_config_entry(TrainConfig& config, const std::string& key, const std::string& value) {
    const Field* field = find_field(key);
    if (!field) throw std::invalid_argument("config: unknown key: " + key);
    static const TrainConfig defaults;
    field->set(config, value);
    const Field* def_field = find_field(key);
    if (def_field->get(config) != def_field->get(defaults))
        config.overrides[key] = field->get(config);
    else
        config.overrides.erase(key);
}

TrainConfig parse_config_text(const std::string& text) {
    TrainConfig config;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string stripped = line;
        std::size_t hash = stripped.find('#');
        if (hash != std::string::npos) stripped = stripped.substr(0, hash);
        stripped = trim(stripped);
        if (stripped.empty()) continue;
        std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(line_no) +
                                        ": expected key = value");
        std::string key = trim(stripped.substr(0, eq));
        std::string value = trim(stripped.substr(eq + 1));
        apply_config_entry(config, key, value);
    }
    return config;
}

TrainConfig parse_config_file(const std::string& path) { return parse_config_text(read_file(path)); }

std::string config_to_text(const TrainConfig& config) {
    std::ostringstream ss;
    for (const auto& [name, field] : fields()) ss << name << " = " << field.get(config) << "\n";
    return ss.str();
}

}  // namespace dcvd
