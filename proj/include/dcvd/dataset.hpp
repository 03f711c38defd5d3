#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace dcvd {

/// One labeled sample: source text, function-level label, flaw-line indices.
/// Line indices are 0-based internally; reports render them 1-based.
struct CodeFunction {
    std::string id;
    std::string source;
    int y_f = 0;                 // 1 = vulnerable
    std::set<int> flaw_lines;    // 0-based, each < n_lines
    int n_lines = 0;

    void validate() const;
};

struct DatasetSplit {
    std::string name;  // train | valid | test
    std::vector<std::string> sample_ids;
};

/// Parses a JSONL file, one record per line with fields
/// {id, func, target, flaw_line_index}. Malformed lines and invalid records
/// raise with the offending line number / id.
std::vector<CodeFunction> load_records(const std::string& path);

/// Parses records from an in-memory JSONL string (same contract as load_records).
std::vector<CodeFunction> parse_records(const std::string& jsonl, const std::string& origin = "<memory>");

/// Inverse of load_records; load(serialize(r)) == r.
std::string serialize_records(const std::vector<CodeFunction>& records);

/// Deterministic disjoint train/valid/test splits. ratios must sum to 1.
std::array<DatasetSplit, 3> make_splits(const std::vector<CodeFunction>& records,
                                        const std::array<double, 3>& ratios, std::uint64_t seed);

/// Deterministic subset of floor(fraction * size) ids (min 1), preserving the
/// split's original relative order. fraction == 1 returns the split unchanged.
DatasetSplit sample_fraction(const DatasetSplit& split, double fraction, std::uint64_t seed);

std::string split_manifest_json(const DatasetSplit& split, std::uint64_t seed);
DatasetSplit split_from_manifest_json(const std::string& json_text);

}  // namespace dcvd
