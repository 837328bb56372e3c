#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "magix/binning.hpp"
#include "magix/model.hpp"
#include "magix/parallel.hpp"
#include "magix/rules.hpp"

namespace magix {

struct LimeConfig {
    std::size_t sample_count = 1000;
    std::optional<double> kernel_width;  // default 0.75 * sqrt(p)
    double ridge_lambda = 1.0;
    std::size_t top_m = 5;

    void validate() const;
    double width_for(std::size_t features) const;
    nlohmann::json to_json() const;
    static LimeConfig from_json(const nlohmann::json& doc);
};

/// Local surrogate around single instances. Perturbations resample each
/// feature independently from the training rows; the interpretable
/// representation marks which features kept the instance's bin.
class LimeExplainer {
public:
    /// `background` and `background_codes` are the training rows raw and binned.
    LimeExplainer(const Classifier& model, const Dataset& background, const BinnedData& background_codes,
                  LimeConfig config);

    const LimeConfig& config() const noexcept { return config_; }
    std::size_t features() const noexcept { return features_; }

    /// Ridge coefficients of the target-class probability on z, one per feature.
    std::vector<double> marginal_contributions(std::span<const double> x, std::span<const int> x_codes,
                                               std::size_t target_class, std::uint64_t seed) const;

    /// Single-bin conditions for the top-M strictly positive coefficients,
    /// strongest first. Features whose value is missing are skipped.
    std::vector<Condition> conditions_for_instance(std::span<const double> x, std::span<const int> x_codes,
                                                   std::size_t target_class, std::uint64_t seed) const;

    /// Same, for a row of the background set.
    std::vector<Condition> conditions_for_row(std::size_t row, std::size_t target_class, std::uint64_t seed) const;

private:
    const Classifier* model_;
    const Dataset* background_;
    const BinnedData* codes_;
    LimeConfig config_;
    std::size_t features_;
};

/// Conditions for a batch of background rows; slot i belongs to rows[i].
/// Each row's seed is derive_seed(seed, "lime", row).
std::vector<std::vector<Condition>> explain_rows(const LimeExplainer& explainer, std::span<const std::size_t> rows,
                                                 std::size_t target_class, std::uint64_t seed,
                                                 const ExecPolicy& exec);

struct InstanceConditions {
    std::vector<Condition> conditions;               // sorted, unique
    std::vector<std::size_t> explained_rows;         // in fold order
    std::vector<std::vector<Condition>> per_instance;
    bool exhausted = false;                          // not-yet-covered emptied
};

/// Walks the rows predicted as `target_class` in seeded shuffled order and
/// accumulates their conditions, removing from the not-yet-covered set every
/// row satisfying a newly added condition; stops once that set is empty.
/// Rows are explained in parallel chunks and folded in order, so the result
/// does not depend on the policy.
InstanceConditions gen_inst_conds(const LimeExplainer& explainer, const EvaluationSet& train,
                                  std::size_t target_class, std::uint64_t seed,
                                  const ExecPolicy& exec = ExecPolicy::parallel());

}  // namespace magix
