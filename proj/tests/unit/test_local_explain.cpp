#include <doctest.h>

#include <algorithm>

#include "magix/error.hpp"
#include "magix/local_explain.hpp"
#include "testing.hpp"

using namespace magix;
using namespace magix::testing;

namespace {

// Uniform [0,1) columns binned at 0.5.
struct Fixture {
    Dataset data;
    BinnedData binned;

    Fixture(std::size_t rows, std::size_t cols, std::uint64_t seed) {
        auto rng = make_rng(seed);
        std::vector<Column> columns;
        binned.rows = rows;
        for (std::size_t j = 0; j < cols; ++j) {
            std::vector<double> v(rows);
            std::vector<int> codes(rows);
            for (std::size_t i = 0; i < rows; ++i) {
                v[i] = uniform01(rng);
                codes[i] = v[i] < 0.5 ? 0 : 1;
            }
            columns.push_back(numeric_column("f" + std::to_string(j), std::move(v)));
            binned.codes.push_back(std::move(codes));
        }
        data = Dataset(std::move(columns), std::nullopt);
    }
};

LimeConfig lime(std::size_t samples = 600) {
    LimeConfig c;
    c.sample_count = samples;
    return c;
}

std::vector<int> codes_of(const BinnedData& b, std::size_t row) {
    std::vector<int> out(b.columns());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = b.code(row, j);
    return out;
}

ModelLabels labels_from(const Classifier& m, const Dataset& d) {
    return ModelLabels(predict_class(m, d.matrix()), m.class_order().size());
}

}  // namespace

TEST_CASE("constant model gives zero contributions") {
    const Fixture fx(200, 4, 1);
    const FunctionModel model({"a", "b"}, 4, [](std::span<const double>) { return std::vector<double>{0.3, 0.7}; });
    const LimeExplainer ex(model, fx.data, fx.binned, lime());
    const auto x = fx.data.instance(0);
    const auto beta = ex.marginal_contributions(x, codes_of(fx.binned, 0), 1, 99);
    REQUIRE(beta.size() == 4);
    for (double b : beta) CHECK(std::abs(b) < 1e-9);
    CHECK(ex.conditions_for_instance(x, codes_of(fx.binned, 0), 1, 99).empty());
}

TEST_CASE("model keyed on one column's bin puts the largest weight on that column") {
    const Fixture fx(300, 6, 2);
    const auto x = fx.data.instance(5);
    const bool x_low = x[3] < 0.5;
    const FunctionModel model({"other", "match"}, 6, [x_low](std::span<const double> v) {
        const bool hit = (v[3] < 0.5) == x_low;
        return std::vector<double>{hit ? 0.0 : 1.0, hit ? 1.0 : 0.0};
    });
    const LimeExplainer ex(model, fx.data, fx.binned, lime());
    const auto beta = ex.marginal_contributions(x, codes_of(fx.binned, 5), 1, 4);
    const auto top = std::max_element(beta.begin(), beta.end()) - beta.begin();
    CHECK(top == 3);
    for (std::size_t j = 0; j < beta.size(); ++j)
        if (j != 3) CHECK(beta[j] < beta[3]);

    const auto conds = ex.conditions_for_instance(x, codes_of(fx.binned, 5), 1, 4);
    REQUIRE_FALSE(conds.empty());
    CHECK(conds.front() == Condition(3, {fx.binned.code(5, 3)}));
}

TEST_CASE("conditions are singletons, positive, capped at top-m, and skip missing codes") {
    const Fixture fx(300, 5, 3);
    const FunctionModel model({"n", "y"}, 5, [](std::span<const double> v) {
        const double s = (v[0] + v[1] + v[2] + v[3] + v[4]) / 5.0;
        return std::vector<double>{1.0 - s, s};
    });
    auto cfg = lime();
    cfg.top_m = 2;
    const LimeExplainer ex(model, fx.data, fx.binned, cfg);
    for (std::size_t row = 0; row < 20; ++row) {
        auto codes = codes_of(fx.binned, row);
        const auto conds = ex.conditions_for_instance(fx.data.instance(row), codes, 1, row);
        CHECK(conds.size() <= 2);
        const auto beta = ex.marginal_contributions(fx.data.instance(row), codes, 1, row);
        for (const auto& c : conds) {
            CHECK(c.values.size() == 1);
            CHECK(c.values.front() == codes[c.attribute]);
            CHECK(beta[c.attribute] > 0.0);
        }
        codes[0] = -1;
        for (const auto& c : ex.conditions_for_instance(fx.data.instance(row), codes, 1, row)) CHECK(c.attribute != 0);
    }

    cfg.top_m = 1;
    const LimeExplainer one(model, fx.data, fx.binned, cfg);
    CHECK(one.conditions_for_row(0, 1, 5).size() <= 1);
}

TEST_CASE("same seed reproduces contributions") {
    const Fixture fx(100, 3, 4);
    const FunctionModel model({"n", "y"}, 3, [](std::span<const double> v) {
        return std::vector<double>{1.0 - v[1], v[1]};
    });
    const LimeExplainer ex(model, fx.data, fx.binned, lime());
    const auto x = fx.data.instance(2);
    CHECK(ex.marginal_contributions(x, codes_of(fx.binned, 2), 1, 11) ==
          ex.marginal_contributions(x, codes_of(fx.binned, 2), 1, 11));
}

TEST_CASE("configuration bounds") {
    LimeConfig c;
    c.sample_count = 10;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.kernel_width = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    CHECK(c.width_for(16) == doctest::Approx(3.0));
    c.kernel_width = 1.5;
    CHECK(LimeConfig::from_json(c.to_json()).kernel_width == 1.5);
}

TEST_CASE("three identical instances stop after the first") {
    // Rows 0..2 identical and predicted "low"; the rest predicted "high".
    std::vector<double> f0{0.1, 0.1, 0.1, 0.9, 0.8, 0.7, 0.95, 0.6, 0.85, 0.75};
    std::vector<double> f1{0.3, 0.3, 0.3, 0.2, 0.9, 0.4, 0.6, 0.1, 0.7, 0.5};
    BinnedData binned;
    binned.rows = 10;
    for (const auto* col : {&f0, &f1}) {
        std::vector<int> codes;
        for (double v : *col) codes.push_back(v < 0.5 ? 0 : 1);
        binned.codes.push_back(std::move(codes));
    }
    const Dataset data({numeric_column("f0", f0), numeric_column("f1", f1)}, std::nullopt);
    const FunctionModel model({"low", "high"}, 2, [](std::span<const double> v) {
        return v[0] < 0.5 ? std::vector<double>{1.0, 0.0} : std::vector<double>{0.0, 1.0};
    });
    const EvaluationSet train(binned, labels_from(model, data));
    const LimeExplainer ex(model, data, train.data, lime());
    const auto got = gen_inst_conds(ex, train, 0, 8, ExecPolicy::serial());
    CHECK(got.exhausted);
    CHECK(got.explained_rows.size() == 1);
    CHECK(std::find(got.conditions.begin(), got.conditions.end(), Condition(0, {0})) != got.conditions.end());
}

TEST_CASE("empty class gives no conditions") {
    const Fixture fx(50, 3, 5);
    const FunctionModel model({"a", "b"}, 3, [](std::span<const double>) { return std::vector<double>{1.0, 0.0}; });
    const EvaluationSet train(fx.binned, labels_from(model, fx.data));
    const LimeExplainer ex(model, fx.data, train.data, lime());
    const auto got = gen_inst_conds(ex, train, 1, 3);
    CHECK(got.conditions.empty());
    CHECK(got.explained_rows.empty());
    CHECK_THROWS_AS(gen_inst_conds(ex, train, 2, 3), ConfigError);
}

TEST_CASE("accumulated conditions come from the instances and account for the covered set") {
    const Fixture fx(180, 5, 6);
    const FunctionModel model({"n", "y"}, 5, [](std::span<const double> v) {
        const double s = 0.6 * (v[0] > 0.5) + 0.4 * (v[2] < 0.5);
        return std::vector<double>{1.0 - s, s};
    });
    const EvaluationSet train(fx.binned, labels_from(model, fx.data));
    const LimeExplainer ex(model, fx.data, train.data, lime(300));
    for (std::size_t target : {0u, 1u}) {
        const auto got = gen_inst_conds(ex, train, target, 21, ExecPolicy::serial());
        std::vector<Condition> pooled;
        for (const auto& list : got.per_instance) pooled.insert(pooled.end(), list.begin(), list.end());
        for (const auto& c : got.conditions) {
            CHECK(c.values.size() == 1);
            CHECK(std::find(pooled.begin(), pooled.end(), c) != pooled.end());
        }
        // Brute force: rows of the class satisfying no accumulated condition.
        RowSet hit(train.rows());
        for (const auto& c : got.conditions) hit |= cover_reference(Rule({c}, target), train.data);
        RowSet uncovered = train.labels.class_rows[target];
        uncovered.subtract(hit);
        CHECK(got.exhausted == uncovered.empty());
        if (!got.exhausted) CHECK(got.explained_rows.size() == train.labels.class_size(target));

        const auto par = gen_inst_conds(ex, train, target, 21, ExecPolicy::parallel(4));
        CHECK(par.conditions == got.conditions);
        CHECK(par.explained_rows == got.explained_rows);
    }
}
