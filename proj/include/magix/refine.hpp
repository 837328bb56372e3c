#pragma once

#include <json.hpp>

#include "magix/rules.hpp"

namespace magix {

struct RefineConfig {
    double jaccard_threshold = 0.5;
    std::size_t max_rules_per_class = 20;
    bool require_above_baseline = true;

    void validate() const;
    nlohmann::json to_json() const;
    static RefineConfig from_json(const nlohmann::json& doc);
};

/// Removes every rule whose correct cover lies inside the correct cover of a
/// retained rule that is at least as precise. Rules are visited by descending
/// precision; survivors keep that order.
RuleSet drop_dominated(const RuleSet& rules, const EvaluationSet& train);

/// Share of test rows the model assigns to `target_class`.
double baseline_precision(const EvaluationSet& test, std::size_t target_class);

/// Annotates each rule with its test precision and drops those strictly
/// below the class baseline. With `enforce` off rules are only annotated.
RuleSet baseline_filter(const RuleSet& rules, const EvaluationSet& test, bool enforce = true);

/// Greedy pass in ranks_before order keeping a rule only if its train cover
/// has Jaccard similarity <= threshold with every kept rule; caps the count.
RuleSet sort_and_dedup(const RuleSet& rules, const EvaluationSet& train, const RefineConfig& cfg);

}  // namespace magix
