#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "magix/model.hpp"

namespace magix {

struct ForestConfig {
    std::size_t tree_count = 500;
    std::size_t min_samples_split = 2;
    std::size_t min_samples_leaf = 1;
    std::uint64_t seed = 0;
    std::optional<std::size_t> max_depth;

    void validate() const;
    nlohmann::json to_json() const;
    static ForestConfig from_json(const nlohmann::json& doc);
};

/// CART tree stored as flat node arrays. A node with feature -1 is a leaf
/// and owns a class distribution.
struct DecisionTree {
    std::vector<int> feature;
    std::vector<double> threshold;
    std::vector<int> left;
    std::vector<int> right;
    std::vector<std::vector<double>> distribution;  // empty for internal nodes

    std::size_t node_count() const noexcept { return feature.size(); }
    /// Leaf distribution reached by x. Missing values (NaN) go right.
    const std::vector<double>& leaf(std::span<const double> x) const;
};

/// Bootstrap-aggregated Gini trees over sqrt(p) candidate features per node.
/// predict-proba is the mean of the leaf class distributions.
class RandomForest final : public Classifier {
public:
    RandomForest(std::vector<std::string> class_order, std::size_t feature_count,
                 std::vector<DecisionTree> trees, ForestConfig config = {});

    /// `labels` are class indices into `class_order`. Trees are seeded per
    /// index, so the result does not depend on the execution policy.
    static RandomForest train(const FeatureMatrix& x, const std::vector<std::size_t>& labels,
                              std::vector<std::string> class_order, const ForestConfig& config,
                              const ExecPolicy& exec = ExecPolicy::parallel());
    /// Trains on the dataset's own labels; class order is the sorted label set.
    static RandomForest train(const Dataset& data, const ForestConfig& config,
                              const ExecPolicy& exec = ExecPolicy::parallel());

    const std::vector<std::string>& class_order() const override { return class_order_; }
    std::size_t feature_count() const override { return feature_count_; }
    std::string kind() const override { return "builtin-forest"; }
    ProbabilityMatrix predict_proba(const FeatureMatrix& instances,
                                    const ExecPolicy& exec = ExecPolicy::serial()) const override;

    const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
    const ForestConfig& config() const noexcept { return config_; }

    nlohmann::json to_json() const;
    static RandomForest from_json(const nlohmann::json& doc);
    void save(const std::filesystem::path& path) const;
    static RandomForest load(const std::filesystem::path& path);

private:
    std::vector<std::string> class_order_;
    std::size_t feature_count_ = 0;
    std::vector<DecisionTree> trees_;
    ForestConfig config_;
};

}  // namespace magix
