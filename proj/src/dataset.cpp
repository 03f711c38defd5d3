#include "dcvd/dataset.hpp"

#include "dcvd/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace dcvd {

using nlohmann::json;

void CodeFunction::validate() const {
    if (source.empty()) throw std::invalid_argument("record " + id + ": source is empty");
    for (int line : flaw_lines) {
        if (line < 0 || line >= n_lines)
            throw std::invalid_argument("record " + id + ": flaw line " + std::to_string(line) +
                                        " out of range (function has " + std::to_string(n_lines) +
                                        " lines)");
    }
    if (y_f == 0 && !flaw_lines.empty())
        throw std::invalid_argument("record " + id + ": negative sample carries flaw lines");
}

namespace {

CodeFunction record_from_json(const json& j, std::size_t line_no) {
    CodeFunction fn;
    if (j.contains("id")) {
        if (j.at("id").is_string())
            fn.id = j.at("id").get<std::string>();
        else
            fn.id = std::to_string(j.at("id").get<std::int64_t>());
    } else {
        fn.id = "line" + std::to_string(line_no);
    }
    if (!j.contains("func") || !j.at("func").is_string())
        throw std::invalid_argument("record " + fn.id + ": missing string field 'func'");
    fn.source = j.at("func").get<std::string>();
    if (!j.contains("target"))
        throw std::invalid_argument("record " + fn.id + ": missing field 'target'");
    fn.y_f = j.at("target").get<int>();
    if (fn.y_f != 0 && fn.y_f != 1)
        throw std::invalid_argument("record " + fn.id + ": target must be 0 or 1");
    fn.n_lines = static_cast<int>(split_lines(fn.source).size());
    if (j.contains("flaw_line_index") && !j.at("flaw_line_index").is_null()) {
        for (const auto& v : j.at("flaw_line_index")) fn.flaw_lines.insert(v.get<int>());
    }
    fn.validate();
    return fn;
}

}  // namespace

std::vector<CodeFunction> parse_records(const std::string& jsonl, const std::string& origin) {
    std::vector<CodeFunction> records;
    std::set<std::string> seen_ids;
    std::istringstream in(jsonl);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                        ": malformed JSON record: " + e.what());
        }
        CodeFunction fn = record_from_json(j, line_no);
        if (!seen_ids.insert(fn.id).second)
            throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                        ": duplicate record id " + fn.id);
        records.push_back(std::move(fn));
    }
    return records;
}

std::vector<CodeFunction> load_records(const std::string& path) {
    return parse_records(read_file(path), path);
}

std::string serialize_records(const std::vector<CodeFunction>& records) {
    std::string out;
    for (const auto& r : records) {
        json j;
        j["id"] = r.id;
        j["func"] = r.source;
        j["target"] = r.y_f;
        j["flaw_line_index"] = std::vector<int>(r.flaw_lines.begin(), r.flaw_lines.end());
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::array<DatasetSplit, 3> make_splits(const std::vector<CodeFunction>& records,
                                        const std::array<double, 3>& ratios, std::uint64_t seed) {
    check(!records.empty(), "make_splits: record list is empty");
    double total = ratios[0] + ratios[1] + ratios[2];
    check(std::abs(total - 1.0) < 1e-9, "make_splits: ratios must sum to 1");
    for (double r : ratios) check(r >= 0.0, "make_splits: ratios must be non-negative");

    std::vector<std::string> ids;
    ids.reserve(records.size());
    for (const auto& r : records) ids.push_back(r.id);
    Rng rng(seed);
    rng.shuffle(ids);

    std::size_t n = ids.size();
    std::size_t n_train = static_cast<std::size_t>(std::floor(ratios[0] * static_cast<double>(n)));
    std::size_t n_valid = static_cast<std::size_t>(std::floor(ratios[1] * static_cast<double>(n)));

    std::array<DatasetSplit, 3> splits;
    splits[0].name = "train";
    splits[1].name = "valid";
    splits[2].name = "test";
    splits[0].sample_ids.assign(ids.begin(), ids.begin() + n_train);
    splits[1].sample_ids.assign(ids.begin() + n_train, ids.begin() + n_train + n_valid);
    splits[2].sample_ids.assign(ids.begin() + n_train + n_valid, ids.end());
    return splits;
}

DatasetSplit sample_fraction(const DatasetSplit& split, double fraction, std::uint64_t seed) {
    check(fraction > 0.0 && fraction <= 1.0, "sample_fraction: fraction must be in (0, 1]");
    if (fraction == 1.0 || split.sample_ids.empty()) return split;

    std::size_t n = split.sample_ids.size();
    std::size_t k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
    if (k == 0) k = 1;

    // Choose k distinct positions, then emit in original order so the subset
    // preserves the split's ordering.
    std::vector<std::size_t> positions(n);
    std::iota(positions.begin(), positions.end(), 0);
    Rng rng(seed);
    rng.shuffle(positions);
    positions.resize(k);
    std::sort(positions.begin(), positions.end());

    DatasetSplit out;
    out.name = split.name;
    for (std::size_t pos : positions) out.sample_ids.push_back(split.sample_ids[pos]);
    return out;
}

std::string split_manifest_json(const DatasetSplit& split, std::uint64_t seed) {
    json j;
    j["name"] = split.name;
    j["seed"] = seed;
    j["ids"] = split.sample_ids;
    return j.dump(2);
}

DatasetSplit split_from_manifest_json(const std::string& json_text) {
    json j = json::parse(json_text);
    DatasetSplit s;
    s.name = j.at("name").get<std::string>();
    for (const auto& v : j.at("ids")) s.sample_ids.push_back(v.get<std::string>());
    return s;
}

}  // namespace dcvd
