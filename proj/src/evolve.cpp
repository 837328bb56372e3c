#include "magix/evolve.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <unordered_set>

#include "magix/error.hpp"
#include "magix/log.hpp"

namespace magix {

using nlohmann::json;

GaConfig GaConfig::desk() {
    GaConfig c;
    c.population_size = 300;
    c.generations = 100;
    return c;
}

void GaConfig::validate() const {
    if (population_size < 2) throw ConfigError("ga.population-size must be at least 2");
    if (generations < 1) throw ConfigError("ga.generations must be positive");
    if (!(crossover_prob >= 0.0 && crossover_prob <= 1.0)) throw ConfigError("ga.crossover-prob must lie in [0,1]");
    if (!(mutation_expected_bits > 0.0)) throw ConfigError("ga.mutation-expected-bits must be positive");
    if (!(rmi_weight >= 0.0) || !(length_weight >= 0.0)) throw ConfigError("ga weights must be non-negative");
    if (tournament_size < 1) throw ConfigError("ga.tournament-size must be positive");
}

json GaConfig::to_json() const {
    return json{{"population_size", population_size},
                {"generations", generations},
                {"crossover_prob", crossover_prob},
                {"mutation_expected_bits", mutation_expected_bits},
                {"rmi_weight", rmi_weight},
                {"length_weight", length_weight},
                {"tournament_size", tournament_size}};
}

GaConfig GaConfig::from_json(const json& doc) { return from_json(doc, GaConfig{}); }

GaConfig GaConfig::from_json(const json& doc, GaConfig c) {
    if (doc.contains("profile") && !doc["profile"].is_null()) {
        const auto profile = doc["profile"].get<std::string>();
        if (profile == "desk") c = desk();
        else if (profile == "full" || profile == "default") c = GaConfig{};
        else throw ConfigError("unknown ga.profile '" + profile + "'");
    }
    c.population_size = doc.value("population_size", c.population_size);
    c.generations = doc.value("generations", c.generations);
    c.crossover_prob = doc.value("crossover_prob", c.crossover_prob);
    c.mutation_expected_bits = doc.value("mutation_expected_bits", c.mutation_expected_bits);
    c.rmi_weight = doc.value("rmi_weight", c.rmi_weight);
    c.length_weight = doc.value("length_weight", c.length_weight);
    c.tournament_size = doc.value("tournament_size", c.tournament_size);
    return c;
}

// ---------------------------------------------------------------- Individual

Individual Individual::from_string(std::string_view bits) {
    Individual ind(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] == '1') ind.set(i);
        else if (bits[i] != '0') throw ConfigError("bit string may only contain 0 and 1");
    }
    return ind;
}

void Individual::set(std::size_t i, bool on) noexcept {
    const auto mask = std::uint64_t{1} << (i & 63);
    if (on) words_[i >> 6] |= mask;
    else words_[i >> 6] &= ~mask;
    fitness_.reset();
}

void Individual::flip(std::size_t i) noexcept {
    words_[i >> 6] ^= std::uint64_t{1} << (i & 63);
    fitness_.reset();
}

std::size_t Individual::active_count() const noexcept {
    std::size_t c = 0;
    for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
    return c;
}

std::vector<std::size_t> Individual::active() const {
    std::vector<std::size_t> out;
    for (std::size_t w = 0; w < words_.size(); ++w)
        for (auto bits = words_[w]; bits; bits &= bits - 1)
            out.push_back(w * 64 + static_cast<std::size_t>(std::countr_zero(bits)));
    return out;
}

std::string Individual::to_string() const {
    std::string s(size_, '0');
    for (std::size_t i = 0; i < size_; ++i)
        if (test(i)) s[i] = '1';
    return s;
}

std::size_t IndividualHash::operator()(const Individual& ind) const noexcept {
    std::uint64_t h = ind.size();
    for (auto w : ind.words()) h = splitmix64(h ^ w);
    return static_cast<std::size_t>(h);
}

// ---------------------------------------------------------------- decode / fitness

std::optional<Rule> decode(const Individual& ind, std::span<const Condition> conditions, std::size_t target_class) {
    if (ind.size() != conditions.size()) throw ConfigError("individual length differs from the condition count");
    const auto on = ind.active();
    if (on.empty()) return std::nullopt;
    std::vector<Condition> picked;
    picked.reserve(on.size());
    for (auto i : on) picked.push_back(conditions[i]);
    return Rule(std::move(picked), target_class);
}

Individual encode(const Rule& rule, std::span<const Condition> conditions) {
    Individual ind(conditions.size());
    for (const auto& c : rule.conditions) {
        bool found = false;
        for (std::size_t i = 0; i < conditions.size(); ++i) {
            if (conditions[i].attribute != c.attribute) continue;
            const auto& vals = conditions[i].values;
            if (std::includes(c.values.begin(), c.values.end(), vals.begin(), vals.end())) {
                ind.set(i);
                found = true;
            }
        }
        if (!found) throw ConfigError("rule condition not present in the condition list");
    }
    return ind;
}

double fitness_value(double rmi_value, std::size_t active_bits, std::size_t n, const GaConfig& cfg) {
    if (active_bits == 0) return -1.0;
    return cfg.rmi_weight * rmi_value -
           cfg.length_weight * static_cast<double>(active_bits) / static_cast<double>(n);
}

FitnessEvaluator::FitnessEvaluator(std::span<const Condition> conditions, std::size_t target_class,
                                   const EvaluationSet& train, const GaConfig& cfg)
    : conditions_(conditions.begin(), conditions.end()), target_class_(target_class), train_(&train), cfg_(cfg) {
    covers_.reserve(conditions_.size());
    for (const auto& c : conditions_) covers_.push_back(train.index.condition_cover(c));
}

double FitnessEvaluator::evaluate(const Individual& ind) const {
    const auto on = ind.active();
    if (on.empty()) return -1.0;
    // OR within an attribute, AND across; same cover as the decoded rule.
    std::map<std::size_t, RowSet> by_attribute;
    for (auto i : on) {
        auto [it, fresh] = by_attribute.try_emplace(conditions_[i].attribute, covers_[i]);
        if (!fresh) it->second |= covers_[i];
    }
    RowSet cov(train_->rows(), true);
    for (const auto& [attr, rows] : by_attribute) cov &= rows;
    const auto t = contingency(cov, train_->labels, target_class_);
    return fitness_value(rmi(t), on.size(), conditions_.size(), cfg_);
}

void FitnessEvaluator::evaluate_population(std::vector<Individual>& population, const ExecPolicy& exec) {
    std::vector<Individual> misses;
    std::unordered_set<Individual, IndividualHash> pending;
    for (const auto& ind : population) {
        if (ind.fitness() || memo_.contains(ind)) continue;
        if (pending.insert(ind).second) misses.push_back(ind);
    }
    std::vector<double> values(misses.size());
    parallel_for(exec, misses.size(), [&](std::size_t i) { values[i] = evaluate(misses[i]); });
    for (std::size_t i = 0; i < misses.size(); ++i) memo_.emplace(std::move(misses[i]), values[i]);
    for (auto& ind : population)
        if (!ind.fitness()) ind.set_fitness(memo_.at(ind));
}

// ---------------------------------------------------------------- operators

std::vector<Individual> initial_population(std::size_t n, const GaConfig& cfg, std::uint64_t seed) {
    if (n == 0) throw ConfigError("initial population needs at least one condition");
    const std::size_t target = cfg.population_size;
    std::vector<Individual> pop;
    pop.reserve(target);
    for (std::size_t k = 1; k <= n && pop.size() < target; ++k) {
        std::vector<std::size_t> idx(k);
        for (std::size_t i = 0; i < k; ++i) idx[i] = i;
        while (pop.size() < target) {
            Individual ind(n);
            for (auto i : idx) ind.set(i);
            pop.push_back(std::move(ind));
            // Next k-combination in lexicographic order.
            std::size_t pos = k;
            while (pos > 0 && idx[pos - 1] == n - k + pos - 1) --pos;
            if (pos == 0) break;
            ++idx[pos - 1];
            for (std::size_t i = pos; i < k; ++i) idx[i] = idx[i - 1] + 1;
        }
    }
    auto rng = make_rng(derive_seed(seed, "initial"));
    const double density = std::min(1.0, 2.0 / static_cast<double>(n));
    while (pop.size() < target) {
        Individual ind(n);
        for (std::size_t i = 0; i < n; ++i)
            if (uniform01(rng) < density) ind.set(i);
        pop.push_back(std::move(ind));
    }
    return pop;
}

std::size_t mutate(Individual& ind, double rate, Rng& rng) {
    const std::size_t n = ind.size();
    if (n == 0 || rate <= 0.0) return 0;
    if (rate >= 1.0) {
        for (std::size_t i = 0; i < n; ++i) ind.flip(i);
        return n;
    }
    const double log_q = std::log1p(-rate);
    std::size_t flipped = 0;
    std::size_t pos = 0;
    while (true) {
        const double u = 1.0 - uniform01(rng);  // (0, 1]
        const double skip = std::floor(std::log(u) / log_q);
        if (skip >= static_cast<double>(n - pos)) break;
        pos += static_cast<std::size_t>(skip);
        ind.flip(pos);
        ++flipped;
        if (++pos >= n) break;
    }
    return flipped;
}

std::pair<Individual, Individual> crossover(const Individual& a, const Individual& b, std::size_t point) {
    if (a.size() != b.size()) throw ConfigError("crossover parents differ in length");
    Individual x(a.size()), y(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool from_a = i < point;
        if (from_a ? a.test(i) : b.test(i)) x.set(i);
        if (from_a ? b.test(i) : a.test(i)) y.set(i);
    }
    return {std::move(x), std::move(y)};
}

namespace {

std::size_t tournament(const std::vector<Individual>& pop, std::size_t size, Rng& rng) {
    auto best = static_cast<std::size_t>(uniform_index(rng, pop.size()));
    for (std::size_t t = 1; t < size; ++t) {
        const auto cand = static_cast<std::size_t>(uniform_index(rng, pop.size()));
        if (*pop[cand].fitness() > *pop[best].fitness()) best = cand;
    }
    return best;
}

GenerationStats summarize(const std::vector<Individual>& pop, std::size_t generation) {
    GenerationStats s{generation, *pop.front().fitness(), 0.0};
    for (const auto& ind : pop) {
        s.best = std::max(s.best, *ind.fitness());
        s.mean += *ind.fitness();
    }
    s.mean /= static_cast<double>(pop.size());
    return s;
}

}  // namespace

EvolveResult evolve_class(std::span<const Condition> conditions, std::size_t target_class,
                          const EvaluationSet& train, const GaConfig& cfg, std::uint64_t seed,
                          const ExecPolicy& exec, std::ostream* progress) {
    cfg.validate();
    EvolveResult result;
    if (conditions.empty()) {
        log_warning("class index " + std::to_string(target_class) + " has no conditions; GA skipped");
        return result;
    }
    const std::size_t n = conditions.size();
    FitnessEvaluator evaluator(conditions, target_class, train, cfg);
    auto pop = initial_population(n, cfg, seed);
    evaluator.evaluate_population(pop, exec);

    auto record = [&](std::size_t g) {
        result.history.push_back(summarize(pop, g));
        if (progress) {
            const auto& h = result.history.back();
            *progress << json{{"class", target_class}, {"generation", h.generation}, {"best", h.best}, {"mean", h.mean}}.dump()
                      << '\n';
        }
    };
    record(0);

    const double rate = cfg.mutation_expected_bits / static_cast<double>(n);
    for (std::size_t g = 1; g <= cfg.generations; ++g) {
        auto rng = make_rng(derive_seed(seed, "generation", g));
        std::size_t elite = 0;
        for (std::size_t i = 1; i < pop.size(); ++i)
            if (*pop[i].fitness() > *pop[elite].fitness()) elite = i;

        std::vector<Individual> next;
        next.reserve(pop.size());
        next.push_back(pop[elite]);
        while (next.size() < pop.size()) {
            const auto& a = pop[tournament(pop, cfg.tournament_size, rng)];
            const auto& b = pop[tournament(pop, cfg.tournament_size, rng)];
            Individual x = a, y = b;
            if (n > 1 && uniform01(rng) < cfg.crossover_prob) {
                const auto point = 1 + static_cast<std::size_t>(uniform_index(rng, n - 1));
                std::tie(x, y) = crossover(a, b, point);
            }
            mutate(x, rate, rng);
            mutate(y, rate, rng);
            next.push_back(std::move(x));
            if (next.size() < pop.size()) next.push_back(std::move(y));
        }
        pop = std::move(next);
        evaluator.evaluate_population(pop, exec);
        record(g);
    }

    std::vector<Rule> seen;
    for (const auto& ind : pop) {
        auto rule = decode(ind, conditions, target_class);
        if (rule && std::find(seen.begin(), seen.end(), *rule) == seen.end()) seen.push_back(std::move(*rule));
    }
    std::sort(seen.begin(), seen.end());
    result.rules.reserve(seen.size());
    for (const auto& r : seen) result.rules.push_back(score(r, train));
    result.final_population = std::move(pop);
    return result;
}

}  // namespace magix
