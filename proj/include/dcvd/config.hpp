#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace dcvd {

/// Training configuration. Defaults mirror the released model's
/// configuration table; every field can be overridden from a key=value file
/// or the CLI, and every override is logged into report headers.
struct TrainConfig {
    // architecture
    int d_prime = 128;      // branch / fusion dimension d'
    int d_k = 256;          // deep representation dimension
    int gat_layers = 2;
    int gat_heads = 4;
    int stmt_heads = 8;     // self-attention heads, statement branch
    int max_seq = 512;
    int embed_dim = 128;    // node embedding width d
    int d_h = 128;          // shared token embedding width
    int enc_layers = 2;     // contextualizer depth (desk-scale default)
    int enc_heads = 4;
    int enc_hidden = 128;

    // training
    std::string optimizer = "adamw";
    double lr = 2e-5;
    std::string lr_schedule = "cosine_restarts";
    int warmup_steps = 500;
    int batch_size = 32;
    int epochs = 50;
    double alpha = 0.4;     // loss balancing
    double beta = 0.1;
    double tau = 0.07;
    double weight_decay = 0.01;
    int lr_cycles = 1;
    std::uint64_t seed = 42;
    bool symmetric_align = false;

    // variant: full | wo_structure | wo_semantic | wo_fusion | wo_multitask
    std::string variant = "full";

    /// Optional parameter archive (checkpoint format); entries whose names
    /// and shapes match are loaded before training, the rest stay at their
    /// random initialization. How pre-trained embeddings or encoder stacks
    /// drop in.
    std::string init_weights;

    // data / provider
    int max_vocab = 20000;
    std::string provider = "fixture";  // fixture | live
    std::string cache_dir;
    std::string base_url;
    std::string model_name;
    std::string api_key_env = "DCVD_API_KEY";

    /// Keys explicitly set away from their defaults, for report headers.
    std::map<std::string, std::string> overrides;
};

/// Applies "key = value"; unknown keys raise. Records the override.
void apply_config_entry(TrainConfig& config, const std::string& key, const std::string& value);

/// Range checks (positive dimensions, alpha in [0,1], tau > 0, ...); throws
/// on the first violation. Run before building a model or pipeline.
void validate_config(const TrainConfig& config);

TrainConfig parse_config_text(const std::string& text);
TrainConfig parse_config_file(const std::string& path);

/// Full key=value dump (defaults included), suitable for re-parsing.
std::string config_to_text(const TrainConfig& config);

bool is_known_variant(const std::string& variant);

}  // namespace dcvd
