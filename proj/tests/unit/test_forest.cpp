#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "magix/error.hpp"
#include "magix/forest.hpp"
#include "testing.hpp"

using namespace magix;
using namespace magix::testing;

namespace {

double accuracy(const Classifier& m, const Dataset& d) {
    const auto pred = predict_labels(m, d.matrix());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == d.labels()[i];
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

ForestConfig small_forest(std::size_t trees, std::uint64_t seed = 3) {
    ForestConfig c;
    c.tree_count = trees;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_CASE("argmax picks the largest entry, ties go to the lowest index") {
    const std::vector<double> a{0.1, 0.7, 0.2}, b{0.5, 0.5};
    CHECK(argmax_class(a) == 1);
    CHECK(argmax_class(b) == 0);
}

TEST_CASE("probability check rejects unnormalized rows") {
    ProbabilityMatrix p(1, 2);
    p.row(0)[0] = 0.6;
    p.row(0)[1] = 0.6;
    CHECK_THROWS_AS(check_probabilities(p), Error);
    p.row(0)[1] = 0.4;
    CHECK_NOTHROW(check_probabilities(p));
}

TEST_CASE("forest on iris clears the accuracy floor and normalizes") {
    const auto d = load_csv(data_file("iris.csv"));
    const auto parts = split(d, {0.7, 7});
    const auto forest = RandomForest::train(parts.train, small_forest(100));
    CHECK(accuracy(forest, parts.test) >= 0.90);
    CHECK_NOTHROW(check_probabilities(forest.predict_proba(parts.test.matrix())));
}

TEST_CASE("setosa-typical instance is predicted setosa") {
    const auto d = load_csv(data_file("iris.csv"));
    const auto forest = RandomForest::train(d, small_forest(50));
    FeatureMatrix x(1, 4);
    x.at(0, 0) = 5.0;
    x.at(0, 1) = 3.4;
    x.at(0, 2) = 1.5;
    x.at(0, 3) = 0.2;
    CHECK(predict_labels(forest, x).front() == "Iris-setosa");
}

TEST_CASE("depth-0 tree returns the class prior") {
    const Dataset d({numeric_column("x", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10})},
                    std::vector<std::string>{"a", "a", "a", "a", "a", "a", "a", "b", "b", "b"});
    auto cfg = small_forest(1);
    cfg.max_depth = 0;
    const auto forest = RandomForest::train(d, cfg);
    REQUIRE(forest.trees().front().node_count() == 1);
    for (const auto& label : predict_labels(forest, d.matrix())) CHECK(label == "a");
}

TEST_CASE("single-class labels cannot be trained") {
    const Dataset d({numeric_column("x", {1, 2, 3})}, std::vector<std::string>{"a", "a", "a"});
    CHECK_THROWS(RandomForest::train(d, small_forest(3)));
}

TEST_CASE("same seed gives bit-identical forests; serial and parallel agree") {
    const auto d = load_csv(data_file("iris.csv"));
    const auto a = RandomForest::train(d, small_forest(30, 9), ExecPolicy::serial());
    const auto b = RandomForest::train(d, small_forest(30, 9), ExecPolicy::parallel(4));
    CHECK(a.to_json() == b.to_json());
    const auto pa = a.predict_proba(d.matrix(), ExecPolicy::serial());
    const auto pb = a.predict_proba(d.matrix(), ExecPolicy::parallel(4));
    CHECK(pa.values == pb.values);
}

TEST_CASE("duplicate instances get identical vectors") {
    const auto d = load_csv(data_file("iris.csv"));
    const auto forest = RandomForest::train(d, small_forest(20));
    FeatureMatrix x(2, 4);
    for (std::size_t j = 0; j < 4; ++j) x.at(0, j) = x.at(1, j) = d.value(60, j);
    const auto p = forest.predict_proba(x);
    for (std::size_t c = 0; c < p.classes; ++c) CHECK(p.row(0)[c] == p.row(1)[c]);
}

TEST_CASE("missing values route right and still give a distribution") {
    const auto d = load_csv(data_file("iris.csv"));
    const auto forest = RandomForest::train(d, small_forest(20));
    FeatureMatrix x(1, 4);
    for (std::size_t j = 0; j < 4; ++j) x.at(0, j) = std::numeric_limits<double>::quiet_NaN();
    CHECK_NOTHROW(check_probabilities(forest.predict_proba(x)));
}

TEST_CASE("forest JSON round trip preserves predictions") {
    const auto d = load_csv(data_file("iris.csv"));
    const auto forest = RandomForest::train(d, small_forest(15));
    const auto path = std::filesystem::temp_directory_path() / "magix_forest_roundtrip.json";
    forest.save(path);
    const auto loaded = RandomForest::load(path);
    std::filesystem::remove(path);
    CHECK(loaded.predict_proba(d.matrix()).values == forest.predict_proba(d.matrix()).values);
    CHECK(loaded.class_order() == forest.class_order());
}

TEST_CASE("forest config validation") {
    ForestConfig c;
    c.tree_count = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.tree_count = 1;
    c.min_samples_split = 1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}
