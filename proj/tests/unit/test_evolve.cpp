#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "magix/error.hpp"
#include "magix/evolve.hpp"
#include "testing.hpp"

using namespace magix;
using namespace magix::testing;

namespace {

std::vector<std::string> as_strings(const std::vector<Individual>& pop) {
    std::vector<std::string> out;
    for (const auto& ind : pop) out.push_back(ind.to_string());
    return out;
}

// Attribute 0 alternates between bins 0 and 1; the model predicts class 1
// exactly on bin 0, so (0, {0}) separates the classes perfectly.
struct Separable {
    BinnedData data;
    std::vector<Condition> conditions;

    Separable() {
        Rng rng(5);
        data = random_binned(200, 5, 2, rng);
        for (std::size_t i = 0; i < 200; ++i) data.codes[0][i] = static_cast<int>(i % 2);
        for (std::size_t a = 0; a < 5; ++a)
            for (int b = 0; b < 2; ++b) conditions.emplace_back(a, std::vector<int>{b});
    }
    ModelLabels labels() const {
        std::vector<std::size_t> pred(200);
        for (std::size_t i = 0; i < 200; ++i) pred[i] = data.codes[0][i] == 0 ? 1 : 0;
        return ModelLabels(pred, 2);
    }
};

// Fitness from first principles: reference cover scan, hand-counted table,
// probability-form mutual information.
double oracle_fitness(const Individual& ind, std::span<const Condition> conds, const BinnedData& data,
                      const ModelLabels& labels, std::size_t target) {
    const auto rule = decode(ind, conds, target);
    if (!rule) return -1.0;
    const auto c = cover_reference(*rule, data);
    double n[4] = {0, 0, 0, 0};
    for (std::size_t i = 0; i < data.rows; ++i) {
        const bool in = c.test(i), pos = labels.predicted[i] == target;
        n[(in ? 0 : 2) + (pos ? 0 : 1)] += 1;
    }
    return rmi_oracle(n[0], n[1], n[2], n[3]) -
           static_cast<double>(ind.active_count()) / static_cast<double>(conds.size());
}

GaConfig small(std::size_t pop, std::size_t gens) {
    GaConfig c;
    c.population_size = pop;
    c.generations = gens;
    return c;
}

}  // namespace

TEST_CASE("decode: bits select a conjunction") {
    std::vector<Condition> conds;
    for (std::size_t a = 0; a < 10; ++a) conds.emplace_back(a, std::vector<int>{0});
    const auto r = decode(Individual::from_string("1001000000"), conds, 1);
    REQUIRE(r);
    CHECK(*r == Rule({conds[0], conds[3]}, 1));
    CHECK_FALSE(decode(Individual::from_string("0000000000"), conds, 1));
}

TEST_CASE("decode: values on one attribute are OR-ed") {
    const std::vector<Condition> conds{Condition(0, {0}), Condition(0, {1}), Condition(1, {2})};
    const auto r = decode(Individual::from_string("110"), conds, 0);
    REQUIRE(r);
    REQUIRE(r->length() == 1);
    CHECK(r->conditions[0] == Condition(0, {0, 1}));
}

TEST_CASE("encode inverts decode for single-valued conditions") {
    std::vector<Condition> conds;
    for (std::size_t a = 0; a < 12; ++a) conds.emplace_back(a, std::vector<int>{static_cast<int>(a % 3)});
    Rng rng(2);
    for (int t = 0; t < 300; ++t) {
        Individual ind(conds.size());
        for (std::size_t i = 0; i < conds.size(); ++i)
            if (uniform01(rng) < 0.3) ind.set(i);
        if (ind.active_count() == 0) continue;
        CHECK(encode(*decode(ind, conds, 0), conds) == ind);
    }
}

TEST_CASE("decoded rules never repeat an attribute") {
    std::vector<Condition> conds;
    for (std::size_t a = 0; a < 4; ++a)
        for (int b = 0; b < 3; ++b) conds.emplace_back(a, std::vector<int>{b});
    Rng rng(3);
    for (int t = 0; t < 500; ++t) {
        Individual ind(conds.size());
        for (std::size_t i = 0; i < conds.size(); ++i)
            if (uniform01(rng) < 0.4) ind.set(i);
        const auto r = decode(ind, conds, 0);
        if (!r) continue;
        std::set<std::size_t> seen;
        for (const auto& c : r->conditions) CHECK(seen.insert(c.attribute).second);
    }
}

TEST_CASE("fitness arithmetic") {
    const GaConfig unit;
    CHECK(fitness_value(0.5, 2, 100, unit) == doctest::Approx(0.48).epsilon(1e-12));
    CHECK(fitness_value(std::numbers::ln2, 1, 100, unit) == doctest::Approx(std::numbers::ln2 - 0.01).epsilon(1e-12));
    CHECK(fitness_value(0.4, 0, 100, unit) == -1.0);
    GaConfig weighted;
    weighted.rmi_weight = 2.0;
    weighted.length_weight = 0.5;
    CHECK(fitness_value(0.25, 4, 10, weighted) == doctest::Approx(0.3));
}

TEST_CASE("individual bookkeeping") {
    auto ind = Individual::from_string("0110");
    CHECK(ind.active_count() == 2);
    CHECK(ind.active() == std::vector<std::size_t>{1, 2});
    ind.set_fitness(0.3);
    ind.flip(0);
    CHECK_FALSE(ind.fitness());
    CHECK(ind.to_string() == "1110");
    CHECK_THROWS_AS(Individual::from_string("01x"), ConfigError);
}

TEST_CASE("initial population enumerates by bit count") {
    CHECK(as_strings(initial_population(4, small(4, 1), 1)) == std::vector<std::string>{"1000", "0100", "0010", "0001"});

    const auto two = initial_population(2, small(4, 1), 1);
    REQUIRE(two.size() == 4);
    CHECK(two[0].to_string() == "10");
    CHECK(two[1].to_string() == "01");
    CHECK(two[2].to_string() == "11");

    const auto big = initial_population(100, small(1200, 1), 1);
    REQUIRE(big.size() == 1200);
    for (std::size_t i = 0; i < 100; ++i) CHECK(big[i].active_count() == 1);
    for (std::size_t i = 100; i < 1200; ++i) CHECK(big[i].active_count() == 2);
    CHECK(big[100].to_string().substr(0, 3) == "110");
    CHECK(big[101].to_string().substr(0, 3) == "101");
}

TEST_CASE("mutation flips about the expected number of bits") {
    Rng rng(77);
    const double rate = 2.0 / 100.0;
    double total = 0;
    for (int t = 0; t < 10000; ++t) {
        Individual ind(100);
        const auto before = ind;
        const auto flipped = mutate(ind, rate, rng);
        std::size_t diff = 0;
        for (std::size_t i = 0; i < 100; ++i) diff += ind.test(i) != before.test(i);
        CHECK(diff == flipped);
        total += static_cast<double>(flipped);
    }
    CHECK(std::abs(total / 10000.0 - 2.0) <= 0.1);
}

TEST_CASE("single-point crossover swaps tails") {
    const auto a = Individual::from_string("111111");
    const auto b = Individual::from_string("000000");
    const auto [c, d] = crossover(a, b, 2);
    CHECK(c.to_string() == "110000");
    CHECK(d.to_string() == "001111");
}

TEST_CASE("evaluator matches an independent fitness oracle") {
    const Separable s;
    const EvaluationSet train(s.data, s.labels());
    FitnessEvaluator ev(s.conditions, 1, train, GaConfig{});
    Rng rng(9);
    std::vector<Individual> pop;
    for (int t = 0; t < 200; ++t) {
        Individual ind(s.conditions.size());
        for (std::size_t i = 0; i < ind.size(); ++i)
            if (uniform01(rng) < 0.25) ind.set(i);
        pop.push_back(ind);
        pop.push_back(ind);
    }
    ev.evaluate_population(pop, ExecPolicy::parallel(4));
    CHECK(ev.memo_size() <= 200);
    for (const auto& ind : pop) {
        REQUIRE(ind.fitness());
        CHECK(*ind.fitness() == doctest::Approx(oracle_fitness(ind, s.conditions, train.data, train.labels, 1)).epsilon(1e-12));
        CHECK(*ind.fitness() == ev.evaluate(ind));
    }
}

TEST_CASE("GA finds the separating condition, which is the exhaustive optimum") {
    const Separable s;
    const EvaluationSet train(s.data, s.labels());
    const std::size_t n = s.conditions.size();

    double best = -2.0;
    std::string best_bits;
    for (std::size_t mask = 1; mask < (std::size_t{1} << n); ++mask) {
        Individual ind(n);
        for (std::size_t i = 0; i < n; ++i)
            if (mask >> i & 1U) ind.set(i);
        const double f = oracle_fitness(ind, s.conditions, train.data, train.labels, 1);
        if (f > best) best = f, best_bits = ind.to_string();
    }
    CHECK(best_bits == "1000000000");
    CHECK(best == doctest::Approx(std::numbers::ln2 - 1.0 / static_cast<double>(n)).epsilon(1e-12));

    const auto result = evolve_class(s.conditions, 1, train, small(60, 40), 13);
    double ga_best = -2.0;
    Rule ga_rule;
    for (const auto& r : result.rules) {
        const double f = fitness_value(r.stats.rmi, encode(r.rule, s.conditions).active_count(), n, GaConfig{});
        if (f > ga_best) ga_best = f, ga_rule = r.rule;
    }
    CHECK(ga_rule == Rule({Condition(0, {0})}, 1));
    CHECK(ga_best == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("best fitness never decreases and runs are reproducible") {
    Rng rng(31);
    auto data = random_binned(150, 6, 3, rng);
    std::vector<std::size_t> pred(150);
    for (std::size_t i = 0; i < 150; ++i) pred[i] = (data.codes[1][i] == 2 || data.codes[4][i] == 0) ? 0 : 1;
    const EvaluationSet train(data, ModelLabels(pred, 2));
    std::vector<Condition> conds;
    for (std::size_t a = 0; a < 6; ++a)
        for (int b = 0; b < 3; ++b) conds.emplace_back(a, std::vector<int>{b});

    std::ostringstream progress;
    const auto a = evolve_class(conds, 0, train, small(40, 25), 5, ExecPolicy::serial(), &progress);
    REQUIRE(a.history.size() == 26);
    for (std::size_t g = 1; g < a.history.size(); ++g) CHECK(a.history[g].best >= a.history[g - 1].best);

    std::istringstream lines(progress.str());
    std::string line;
    std::size_t count = 0;
    while (std::getline(lines, line)) {
        const auto j = nlohmann::json::parse(line);
        CHECK(j.at("generation") == count);
        CHECK(j.contains("best"));
        CHECK(j.contains("mean"));
        ++count;
    }
    CHECK(count == 26);

    const auto b = evolve_class(conds, 0, train, small(40, 25), 5, ExecPolicy::parallel(4));
    REQUIRE(a.rules.size() == b.rules.size());
    for (std::size_t i = 0; i < a.rules.size(); ++i) {
        CHECK(a.rules[i].rule == b.rules[i].rule);
        CHECK(a.rules[i].stats.rmi == b.rules[i].stats.rmi);
    }
    CHECK(a.final_population == b.final_population);

    std::set<Rule> unique;
    for (const auto& r : a.rules) CHECK(unique.insert(r.rule).second);
}

TEST_CASE("empty condition list gives an empty rule set") {
    const Separable s;
    const EvaluationSet train(s.data, s.labels());
    CHECK(evolve_class({}, 1, train, small(10, 2), 1).rules.empty());
}

TEST_CASE("profiles and validation") {
    const auto desk = GaConfig::desk();
    CHECK(desk.population_size == 300);
    CHECK(desk.generations == 100);
    const GaConfig full;
    CHECK(full.population_size == 1200);
    CHECK(full.generations == 600);
    CHECK(full.crossover_prob == 0.5);
    CHECK(full.mutation_expected_bits == 2.0);
    CHECK(GaConfig::from_json(nlohmann::json{{"profile", "desk"}, {"generations", 7}}).generations == 7);
    CHECK(GaConfig::from_json(nlohmann::json{{"profile", "desk"}}).population_size == 300);
    CHECK(GaConfig::from_json(nlohmann::json{{"profile", "full"}}).population_size == 1200);
    CHECK_THROWS_AS(GaConfig::from_json(nlohmann::json{{"profile", "huge"}}), ConfigError);
    CHECK_THROWS_AS(small(1, 1).validate(), ConfigError);
}
