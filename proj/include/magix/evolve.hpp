#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "magix/parallel.hpp"
#include "magix/random.hpp"
#include "magix/rules.hpp"

namespace magix {

struct GaConfig {
    std::size_t population_size = 1200;
    std::size_t generations = 600;
    double crossover_prob = 0.5;
    double mutation_expected_bits = 2.0;
    double rmi_weight = 1.0;
    double length_weight = 1.0;
    std::size_t tournament_size = 2;

    /// Small profile for laptops and CI: 300 individuals, 100 generations.
    static GaConfig desk();

    void validate() const;
    nlohmann::json to_json() const;
    static GaConfig from_json(const nlohmann::json& doc);
    static GaConfig from_json(const nlohmann::json& doc, GaConfig defaults);
};

/// Bit string over a class's condition list. Any bit change clears the
/// cached fitness.
class Individual {
public:
    Individual() = default;
    explicit Individual(std::size_t bits) : size_(bits), words_((bits + 63) / 64, 0) {}
    /// Parses "1001..." (bit 0 first).
    static Individual from_string(std::string_view bits);

    std::size_t size() const noexcept { return size_; }
    bool test(std::size_t i) const noexcept { return (words_[i >> 6] >> (i & 63)) & 1U; }
    void set(std::size_t i, bool on = true) noexcept;
    void flip(std::size_t i) noexcept;
    std::size_t active_count() const noexcept;
    std::vector<std::size_t> active() const;
    std::string to_string() const;

    const std::vector<std::uint64_t>& words() const noexcept { return words_; }
    std::optional<double> fitness() const noexcept { return fitness_; }
    void set_fitness(double f) noexcept { fitness_ = f; }

    friend bool operator==(const Individual& a, const Individual& b) noexcept {
        return a.size_ == b.size_ && a.words_ == b.words_;
    }

private:
    std::size_t size_ = 0;
    std::vector<std::uint64_t> words_;
    std::optional<double> fitness_;
};

struct IndividualHash {
    std::size_t operator()(const Individual& ind) const noexcept;
};

/// Active conditions grouped by attribute, OR within an attribute and AND
/// across. All-zero strings decode to nothing.
std::optional<Rule> decode(const Individual& ind, std::span<const Condition> conditions, std::size_t target_class);

/// Inverse of decode for rules whose conditions all appear in the list.
Individual encode(const Rule& rule, std::span<const Condition> conditions);

/// rmiWeight * RMI - lengthWeight * active/N; -1 for the all-zero string.
double fitness_value(double rmi, std::size_t active_bits, std::size_t n, const GaConfig& cfg);

/// Fitness over one class's conditions with the condition covers precomputed
/// and a memo keyed by bit string.
class FitnessEvaluator {
public:
    FitnessEvaluator(std::span<const Condition> conditions, std::size_t target_class, const EvaluationSet& train,
                     const GaConfig& cfg);

    std::size_t condition_count() const noexcept { return conditions_.size(); }
    /// Uncached evaluation.
    double evaluate(const Individual& ind) const;
    /// Fills the cached fitness of every individual; cache misses are
    /// evaluated under `exec`.
    void evaluate_population(std::vector<Individual>& population, const ExecPolicy& exec);

    std::size_t memo_size() const noexcept { return memo_.size(); }

private:
    std::vector<Condition> conditions_;
    std::vector<RowSet> covers_;
    std::size_t target_class_;
    const EvaluationSet* train_;
    GaConfig cfg_;
    std::unordered_map<Individual, double, IndividualHash> memo_;
};

/// One-bit strings, then two-bit strings in lexicographic order, and so on;
/// when combinations run out the rest are random with bit density 2/N.
std::vector<Individual> initial_population(std::size_t n, const GaConfig& cfg, std::uint64_t seed);

/// Flips each bit independently with probability `rate` (geometric skips).
/// Returns the number of flipped bits.
std::size_t mutate(Individual& ind, double rate, Rng& rng);

/// Single-point crossover at `point` in [1, N-1].
std::pair<Individual, Individual> crossover(const Individual& a, const Individual& b, std::size_t point);

struct GenerationStats {
    std::size_t generation = 0;
    double best = 0.0;
    double mean = 0.0;
};

struct EvolveResult {
    RuleSet rules;  // decoded final population, deduplicated, canonical order
    std::vector<GenerationStats> history;
    std::vector<Individual> final_population;
};

/// Generational GA for one class. Generation g draws from
/// derive_seed(seed, "generation", g). `progress`, when set, receives one
/// JSON line per generation.
EvolveResult evolve_class(std::span<const Condition> conditions, std::size_t target_class,
                          const EvaluationSet& train, const GaConfig& cfg, std::uint64_t seed,
                          const ExecPolicy& exec = ExecPolicy::parallel(), std::ostream* progress = nullptr);

}  // namespace magix
