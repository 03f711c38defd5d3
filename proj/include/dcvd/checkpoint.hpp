#pragma once

#include "dcvd/config.hpp"
#include "dcvd/nn.hpp"
#include "dcvd/vocab.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dcvd {

/// Versioned model archive: config snapshot, both vocabularies, every
/// learnable parameter by name, and the recorded validation score.
/// Loading and re-evaluating reproduces that score bit-for-bit.
struct Checkpoint {
    TrainConfig config;
    std::vector<std::string> semantic_terms;
    std::vector<std::string> node_token_terms;
    std::int64_t epoch = 0;
    double valid_score = 0.0;
    std::vector<std::pair<std::string, nn::Mat>> parameters;  // name-sorted
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Extracts the current parameter values of a registry, name-sorted.
std::vector<std::pair<std::string, nn::Mat>> snapshot_parameters(const nn::ParamRegistry& reg);

/// Writes values back into an existing registry; the name sets must match
/// exactly.
void restore_parameters(nn::ParamRegistry& reg,
                        const std::vector<std::pair<std::string, nn::Mat>>& params);

/// Partial load: copies every archive entry whose name and shape match a
/// registered parameter (pre-trained embedding tables, encoder stacks).
/// Returns the number of parameters loaded.
int overlay_parameters(nn::ParamRegistry& reg,
                       const std::vector<std::pair<std::string, nn::Mat>>& params);

}  // namespace dcvd
