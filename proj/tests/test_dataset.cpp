#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dcvd/dataset.hpp"
#include "dcvd/util.hpp"

#include <algorithm>
#include <set>

using namespace dcvd;

namespace {

std::string ten_line_body() {
    std::string s = "int f(int a) {\n";
    for (int i = 0; i < 8; ++i) s += "  a += " + std::to_string(i) + ";\n";
    s += "}";
    return s;  // 10 lines
}

std::string record_line(const std::string& id, int target, const std::vector<int>& flaws,
                        const std::string& body) {
    std::string flaw_json = "[";
    for (std::size_t i = 0; i < flaws.size(); ++i)
        flaw_json += (i ? "," : "") + std::to_string(flaws[i]);
    flaw_json += "]";
    std::string escaped;
    for (char c : body) {
        if (c == '\n') escaped += "\\n";
        else if (c == '"') escaped += "\\\"";
        else if (c == '\\') escaped += "\\\\";
        else escaped += c;
    }
    return "{\"id\":\"" + id + "\",\"func\":\"" + escaped + "\",\"target\":" +
           std::to_string(target) + ",\"flaw_line_index\":" + flaw_json + "}";
}

std::vector<CodeFunction> make_records(int n) {
    std::string jsonl;
    for (int i = 0; i < n; ++i)
        jsonl += record_line("fn" + std::to_string(i), i % 2, i % 2 ? std::vector<int>{1} : std::vector<int>{},
                             "int f" + std::to_string(i) + "(){\n  return " + std::to_string(i) + ";\n}") +
                 "\n";
    return parse_records(jsonl);
}

}  // namespace

TEST_CASE("field mapping for a positive sample") {
    std::string jsonl = record_line("a1", 1, {3, 7}, ten_line_body());
    auto records = parse_records(jsonl);
    REQUIRE(records.size() == 1);
    CHECK(records[0].y_f == 1);
    CHECK(records[0].flaw_lines == std::set<int>{3, 7});
    CHECK(records[0].n_lines == 10);
}

TEST_CASE("negative sample maps to empty flaw set") {
    auto records = parse_records(record_line("n1", 0, {}, "int g(){return 0;}"));
    REQUIRE(records.size() == 1);
    CHECK(records[0].y_f == 0);
    CHECK(records[0].flaw_lines.empty());
}

TEST_CASE("flaw index beyond the line count names the offending id") {
    std::string body = "int f(){\nreturn 0;\n}\n\n";  // 5 lines
    std::string jsonl = record_line("bad7", 1, {12}, body);
    CHECK_THROWS_WITH_AS(parse_records(jsonl), doctest::Contains("bad7"), std::invalid_argument);
}

TEST_CASE("negative sample carrying flaw lines is rejected") {
    std::string jsonl = record_line("neg", 0, {1}, "int f(){\nreturn 0;\n}");
    CHECK_THROWS_WITH_AS(parse_records(jsonl), doctest::Contains("neg"), std::invalid_argument);
}

TEST_CASE("malformed JSON reports the line number") {
    std::string jsonl = record_line("ok", 0, {}, "int f(){return 0;}") + "\n{not json}\n";
    CHECK_THROWS_WITH_AS(parse_records(jsonl), doctest::Contains(":2"), std::invalid_argument);
}

TEST_CASE("round trip: serialize then parse gives equal records") {
    auto records = make_records(7);
    auto again = parse_records(serialize_records(records));
    REQUIRE(again.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(again[i].id == records[i].id);
        CHECK(again[i].source == records[i].source);
        CHECK(again[i].y_f == records[i].y_f);
        CHECK(again[i].flaw_lines == records[i].flaw_lines);
        CHECK(again[i].n_lines == records[i].n_lines);
    }
}

TEST_CASE("splits: sizes, disjointness, determinism") {
    auto records = make_records(10);
    auto splits = make_splits(records, {0.8, 0.1, 0.1}, 7);
    CHECK(splits[0].sample_ids.size() == 8);
    CHECK(splits[1].sample_ids.size() == 1);
    CHECK(splits[2].sample_ids.size() == 1);

    std::set<std::string> all;
    for (const auto& s : splits)
        for (const auto& id : s.sample_ids) CHECK(all.insert(id).second);
    CHECK(all.size() == 10);

    auto splits2 = make_splits(records, {0.8, 0.1, 0.1}, 7);
    for (int i = 0; i < 3; ++i)
        CHECK(splits[static_cast<std::size_t>(i)].sample_ids ==
              splits2[static_cast<std::size_t>(i)].sample_ids);

    auto splits3 = make_splits(records, {0.8, 0.1, 0.1}, 8);
    CHECK(splits3[0].sample_ids != splits[0].sample_ids);  // different seed reshuffles
}

TEST_CASE("splits reject bad inputs") {
    auto records = make_records(4);
    CHECK_THROWS_AS(make_splits(records, {0.5, 0.5, 0.5}, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_splits({}, {0.8, 0.1, 0.1}, 1), std::invalid_argument);
}

TEST_CASE("sample_fraction: size, identity, determinism, order") {
    DatasetSplit split;
    split.name = "test";
    for (int i = 0; i < 100; ++i) split.sample_ids.push_back("id" + std::to_string(i));

    auto sub = sample_fraction(split, 0.3, 1);
    CHECK(sub.sample_ids.size() == 30);

    auto identity = sample_fraction(split, 1.0, 99);
    CHECK(identity.sample_ids == split.sample_ids);

    auto sub2 = sample_fraction(split, 0.3, 1);
    CHECK(sub.sample_ids == sub2.sample_ids);

    // subset preserves the original relative order
    std::vector<std::string> sorted_by_original;
    for (const auto& id : split.sample_ids)
        if (std::find(sub.sample_ids.begin(), sub.sample_ids.end(), id) != sub.sample_ids.end())
            sorted_by_original.push_back(id);
    CHECK(sub.sample_ids == sorted_by_original);

    CHECK_THROWS_AS(sample_fraction(split, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(sample_fraction(split, -0.5, 1), std::invalid_argument);
}

TEST_CASE("sample_fraction floors but keeps at least one id") {
    DatasetSplit split;
    split.name = "t";
    split.sample_ids = {"a", "b", "c"};
    CHECK(sample_fraction(split, 0.1, 3).sample_ids.size() == 1);
}

TEST_CASE("split manifest round trip") {
    DatasetSplit split;
    split.name = "valid";
    split.sample_ids = {"x", "y", "z"};
    DatasetSplit back = split_from_manifest_json(split_manifest_json(split, 42));
    CHECK(back.name == split.name);
    CHECK(back.sample_ids == split.sample_ids);
}

TEST_CASE("duplicate record ids are rejected with the line number") {
    std::string jsonl = record_line("dup", 0, {}, "int a(){return 0;}") + "\n" +
                        record_line("dup", 0, {}, "int b(){return 1;}") + "\n";
    CHECK_THROWS_WITH_AS(parse_records(jsonl), doctest::Contains("dup"), std::invalid_argument);
}

TEST_CASE("empty source is rejected") {
    CHECK_THROWS_AS(parse_records("{\"id\":\"e\",\"func\":\"\",\"target\":0,\"flaw_line_index\":[]}"),
                    std::invalid_argument);
}
