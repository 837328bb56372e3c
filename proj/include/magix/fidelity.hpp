#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "magix/parallel.hpp"
#include "magix/rules.hpp"

namespace magix {

/// Rule-based stand-in for the model: the most precise covering rule
/// decides, exact ties are drawn at random, uncovered rows abstain.
struct ProxyModel {
    RuleSet rules;  // pooled across classes, descending train RMI
    std::size_t requested_k = 0;
    std::size_t effective_k = 0;
    std::uint64_t seed = 0;
};

/// Pools the per-class rule sets, orders them with ranks_before and keeps
/// the first K in total. K beyond the pool size uses every rule.
ProxyModel build_proxy(std::span<const RuleSet> per_class, std::size_t k, std::uint64_t seed);

/// Prediction for row `row` of `data`; the tie draw is seeded from
/// (proxy.seed, row).
std::optional<std::size_t> proxy_predict(const ProxyModel& proxy, const BinnedData& data, std::size_t row);

/// Predictions for every row; precomputed covers, rows under `exec`.
std::vector<std::optional<std::size_t>> proxy_predict_all(const ProxyModel& proxy, const EvaluationSet& eval,
                                                          const ExecPolicy& exec = ExecPolicy::parallel());

struct ImitationPoint {
    std::size_t k = 0;
    std::size_t effective_k = 0;
    double imitation = 0.0;
    double coverage = 0.0;  // share of rows covered by at least one rule
};

struct ImitationCurve {
    std::vector<ImitationPoint> points;

    nlohmann::json to_json() const;
    static ImitationCurve from_json(const nlohmann::json& doc);
    /// One header row of Im@K labels and one row of percentages.
    std::string to_text(std::string_view label) const;
};

/// Parses "1,2,5,10,20"; values must be positive and strictly increasing.
std::vector<std::size_t> parse_ks(std::string_view text);

/// Share of `test` rows where the proxy agrees with the model labels stored
/// in `test`; abstentions count as disagreement.
ImitationCurve imitation_at_k(std::span<const RuleSet> per_class, const EvaluationSet& test,
                              std::span<const std::size_t> ks, std::uint64_t seed,
                              const ExecPolicy& exec = ExecPolicy::parallel());

}  // namespace magix
