#include "magix/refine.hpp"

#include <algorithm>

#include "magix/error.hpp"

namespace magix {

using nlohmann::json;

void RefineConfig::validate() const {
    if (!(jaccard_threshold > 0.0 && jaccard_threshold <= 1.0))
        throw ConfigError("refine.jaccard-threshold must lie in (0,1]");
    if (max_rules_per_class < 1) throw ConfigError("refine.max-rules-per-class must be positive");
}

json RefineConfig::to_json() const {
    return json{{"jaccard_threshold", jaccard_threshold},
                {"max_rules_per_class", max_rules_per_class},
                {"require_above_baseline", require_above_baseline}};
}

RefineConfig RefineConfig::from_json(const json& doc) {
    RefineConfig c;
    c.jaccard_threshold = doc.value("jaccard_threshold", c.jaccard_threshold);
    c.max_rules_per_class = doc.value("max_rules_per_class", c.max_rules_per_class);
    c.require_above_baseline = doc.value("require_above_baseline", c.require_above_baseline);
    return c;
}

RuleSet drop_dominated(const RuleSet& rules, const EvaluationSet& train) {
    std::vector<std::size_t> order(rules.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (rules[a].stats.precision != rules[b].stats.precision)
            return rules[a].stats.precision > rules[b].stats.precision;
        return ranks_before(rules[a], rules[b]);
    });

    RuleSet kept;
    std::vector<RowSet> kept_correct;
    for (auto i : order) {
        const auto& r = rules[i];
        auto correct = cover(r.rule, train);
        correct &= train.labels.class_rows.at(r.rule.target_class);
        bool dominated = false;
        for (std::size_t k = 0; k < kept.size() && !dominated; ++k)
            dominated = r.stats.precision <= kept[k].stats.precision && correct.is_subset_of(kept_correct[k]);
        if (dominated) continue;
        kept.push_back(r);
        kept_correct.push_back(std::move(correct));
    }
    return kept;
}

double baseline_precision(const EvaluationSet& test, std::size_t target_class) {
    if (test.rows() == 0) return 0.0;
    return static_cast<double>(test.labels.class_size(target_class)) / static_cast<double>(test.rows());
}

RuleSet baseline_filter(const RuleSet& rules, const EvaluationSet& test, bool enforce) {
    RuleSet out;
    for (const auto& r : rules) {
        const auto stats = rule_stats(contingency(r.rule, test), r.rule.length());
        if (enforce && stats.precision < baseline_precision(test, r.rule.target_class)) continue;
        auto kept = r;
        kept.test_precision = stats.precision;
        out.push_back(std::move(kept));
    }
    return out;
}

RuleSet sort_and_dedup(const RuleSet& rules, const EvaluationSet& train, const RefineConfig& cfg) {
    cfg.validate();
    RuleSet sorted = rules;
    std::sort(sorted.begin(), sorted.end(), ranks_before);
    RuleSet kept;
    std::vector<RowSet> kept_covers;
    for (auto& r : sorted) {
        if (kept.size() >= cfg.max_rules_per_class) break;
        auto cov = cover(r.rule, train);
        const bool similar = std::any_of(kept_covers.begin(), kept_covers.end(),
                                         [&](const RowSet& k) { return cov.jaccard(k) > cfg.jaccard_threshold; });
        if (similar) continue;
        kept.push_back(std::move(r));
        kept_covers.push_back(std::move(cov));
    }
    return kept;
}

}  // namespace magix
