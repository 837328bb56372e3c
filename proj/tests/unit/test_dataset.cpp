#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "magix/dataset.hpp"
#include "magix/error.hpp"
#include "testing.hpp"

using namespace magix;
using magix::testing::data_file;

TEST_CASE("iris loads with four numeric features and three classes") {
    const auto d = load_csv(data_file("iris.csv"));
    CHECK(d.rows() == 150);
    CHECK(d.feature_count() == 4);
    CHECK(d.label_values().size() == 3);
    for (const auto& c : d.columns()) CHECK(c.numeric());
    CHECK(d.column(3).name() == "petal-width");
}

TEST_CASE("header without data rows is rejected") {
    CHECK_THROWS_AS(parse_csv("a,b,class\n"), ParseError);
}

TEST_CASE("ragged row names its line") {
    try {
        parse_csv("a,b,class\n1,2,x\n3,y\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("non-numeric tokens make a column categorical") {
    const auto d = parse_csv("level,x,class\nlow,1,a\nmed,2,b\nhigh,3,a\n");
    CHECK_FALSE(d.column(0).numeric());
    CHECK(d.column(1).numeric());
    CHECK(d.column(0).categories.size() == 3);
    CHECK(d.format_value(0, d.value(1, 0)) == "med");
}

TEST_CASE("missing markers are recorded as missing") {
    const auto d = parse_csv("x,y,class\n1,?,a\n,2,b\nNA,3,a\n");
    CHECK(is_missing(d.value(0, 1)));
    CHECK(is_missing(d.value(1, 0)));
    CHECK(is_missing(d.value(2, 0)));
    CHECK(d.column(1).numeric());
}

TEST_CASE("quoted fields follow RFC-4180") {
    const auto records = parse_csv_records("a,b\n\"x,1\",\"say \"\"hi\"\"\"\n\"multi\nline\",2\n");
    REQUIRE(records.size() == 3);
    CHECK(records[1][0] == "x,1");
    CHECK(records[1][1] == "say \"hi\"");
    CHECK(records[2][0] == "multi\nline");
}

TEST_CASE("schema hint forces column kinds and class column") {
    Schema hint;
    hint.columns = {{"code", ColumnKind::Categorical}, {"label", ColumnKind::Categorical}, {"v", ColumnKind::Numeric}};
    hint.class_column = "label";
    CsvOptions opts;
    opts.schema_hint = hint;
    const auto d = parse_csv("code,label,v\n1,a,0.5\n2,b,1.5\n", opts);
    CHECK(d.feature_count() == 2);
    CHECK_FALSE(d.column(0).numeric());
    CHECK(d.labels() == std::vector<std::string>{"a", "b"});
}

TEST_CASE("schema round-trips through JSON") {
    Schema s;
    s.columns = {{"a", ColumnKind::Numeric}, {"b", ColumnKind::Categorical}, {"y", ColumnKind::Categorical}};
    s.class_column = "y";
    CHECK(Schema::from_json(s.to_json()) == s);
}

TEST_CASE("fingerprint depends on content only") {
    const auto a = content_fingerprint("x,class\n1,a\n");
    CHECK(a == content_fingerprint("x,class\r\n1,a\r\n"));
    CHECK(a != content_fingerprint("x,class\n2,a\n"));
}

TEST_CASE("split of 150 rows at 0.7 gives 105/45, stable per seed") {
    const auto d = load_csv(data_file("iris.csv"));
    const auto s1 = split(d, {0.7, 7});
    const auto s2 = split(d, {0.7, 7});
    CHECK(s1.train.rows() == 105);
    CHECK(s1.test.rows() == 45);
    CHECK(s1.indices.train == s2.indices.train);
    const auto s3 = split(d, {0.7, 8});
    CHECK(s1.indices.train != s3.indices.train);
}

TEST_CASE("split is a disjoint exhaustive partition for any seed") {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        std::vector<std::string> strata;
        for (std::size_t i = 0; i < 97; ++i) strata.push_back(std::to_string(i % 4));
        const auto s = split_indices(97, &strata, {0.6, seed});
        std::vector<std::size_t> all = s.train;
        all.insert(all.end(), s.test.begin(), s.test.end());
        std::sort(all.begin(), all.end());
        REQUIRE(all.size() == 97);
        for (std::size_t i = 0; i < 97; ++i) CHECK(all[i] == i);
    }
}

TEST_CASE("split keeps class proportions") {
    std::vector<std::string> strata(100, "a");
    std::fill(strata.begin() + 80, strata.end(), "b");
    const auto s = split_indices(100, &strata, {0.5, 3});
    std::size_t b_train = 0;
    for (auto i : s.train) b_train += strata[i] == "b";
    CHECK(b_train == 10);
}

TEST_CASE("singleton class goes to train with a warning") {
    const std::vector<std::string> strata{"a", "b"};
    const auto s = split_indices(2, &strata, {0.5, 1});
    CHECK(s.train.size() == 2);
    CHECK(s.test.empty());
    CHECK(s.warnings.size() == 2);
}

TEST_CASE("two unstratified rows at 0.5 split one each side") {
    const auto s = split_indices(2, nullptr, {0.5, 1});
    CHECK(s.train.size() == 1);
    CHECK(s.test.size() == 1);
}

TEST_CASE("train fraction must lie strictly inside (0,1)") {
    CHECK_THROWS_AS(split_indices(10, nullptr, {1.0, 0}), ConfigError);
    CHECK_THROWS_AS(split_indices(10, nullptr, {0.0, 0}), ConfigError);
}
