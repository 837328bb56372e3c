#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "magix/binning.hpp"
#include "magix/row_set.hpp"

namespace magix {

/// Predicate on one attribute: its bin index must lie in `values`.
/// `values` is sorted and duplicate-free.
struct Condition {
    std::size_t attribute = 0;
    std::vector<int> values;

    Condition() = default;
    Condition(std::size_t attr, std::vector<int> vals);

    bool satisfied_by(int code) const noexcept;

    friend bool operator==(const Condition&, const Condition&) = default;
    friend auto operator<=>(const Condition&, const Condition&) = default;
};

/// Conjunction of conditions, at most one per attribute, predicting a class
/// (an index into the model's class order). Conditions are kept sorted by
/// attribute, which makes equal rules compare equal.
struct Rule {
    std::vector<Condition> conditions;
    std::size_t target_class = 0;

    Rule() = default;
    /// Merges conditions on the same attribute by value union (OR) and sorts.
    Rule(std::vector<Condition> conds, std::size_t target);

    std::size_t length() const noexcept { return conditions.size(); }
    /// Brute-force predicate over one binned row.
    bool covers(const BinnedData& data, std::size_t row) const;

    friend bool operator==(const Rule&, const Rule&) = default;
    friend auto operator<=>(const Rule&, const Rule&) = default;
};

/// Model labels for an evaluation set: predicted class index per row plus
/// the row set of each class.
struct ModelLabels {
    std::vector<std::size_t> predicted;
    std::vector<RowSet> class_rows;

    ModelLabels() = default;
    ModelLabels(std::vector<std::size_t> predicted, std::size_t class_count);

    std::size_t rows() const noexcept { return predicted.size(); }
    std::size_t class_count() const noexcept { return class_rows.size(); }
    std::size_t class_size(std::size_t c) const { return class_rows.at(c).count(); }
};

/// Binned rows with a row set per (attribute, bin), so covers reduce to
/// word-wise set algebra.
class CoverIndex {
public:
    CoverIndex() = default;
    explicit CoverIndex(const BinnedData& data);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t attributes() const noexcept { return value_rows_.size(); }
    const BinnedData& data() const noexcept { return *data_; }

    const RowSet& value_rows(std::size_t attribute, int bin) const;
    RowSet condition_cover(const Condition& c) const;
    RowSet cover(const Rule& rule) const;

private:
    const BinnedData* data_ = nullptr;
    std::size_t rows_ = 0;
    std::vector<std::vector<RowSet>> value_rows_;
    RowSet empty_;
};

/// Everything rule statistics are computed against: the binned rows and the
/// model's predictions for them. Ground-truth labels never enter here.
struct EvaluationSet {
    BinnedData data;
    ModelLabels labels;
    CoverIndex index;

    EvaluationSet(BinnedData binned, ModelLabels model_labels);
    EvaluationSet(const EvaluationSet&) = delete;
    EvaluationSet& operator=(const EvaluationSet&) = delete;

    std::size_t rows() const noexcept { return data.rows; }
};

/// Cell counts of the rule-fires x model-predicts-class table.
struct ContingencyTable {
    std::size_t n11 = 0;  // covered, predicted target
    std::size_t n12 = 0;  // covered, predicted other
    std::size_t n13 = 0;  // not covered, predicted target
    std::size_t n14 = 0;  // not covered, predicted other

    std::size_t total() const noexcept { return n11 + n12 + n13 + n14; }
    friend bool operator==(const ContingencyTable&, const ContingencyTable&) = default;
};

struct RuleStats {
    std::size_t cover_count = 0;
    std::size_t correct_cover_count = 0;
    std::size_t length = 0;
    double precision = 0.0;
    double class_coverage = 0.0;
    double rmi = 0.0;
};

/// A rule with its training statistics and, after the held-out check, its
/// test precision.
struct ScoredRule {
    Rule rule;
    RuleStats stats;
    std::optional<double> test_precision;
};

using RuleSet = std::vector<ScoredRule>;

/// Rows satisfying every condition; throws on unknown attributes.
RowSet cover(const Rule& rule, const EvaluationSet& eval);
/// Row-by-row scan of the rule predicate; the reference for `cover`.
RowSet cover_reference(const Rule& rule, const BinnedData& data);

ContingencyTable contingency(const RowSet& cover, const ModelLabels& labels, std::size_t target_class);
ContingencyTable contingency(const Rule& rule, const EvaluationSet& eval);

/// Mutual information (natural log) of the 2x2 table, negated when the rule
/// is anti-associated with the class (n11*n14 < n12*n13).
double rmi(const ContingencyTable& t);

RuleStats rule_stats(const ContingencyTable& t, std::size_t length);
RuleStats rule_stats(const Rule& rule, const EvaluationSet& eval);
ScoredRule score(const Rule& rule, const EvaluationSet& eval);

struct RuleSetStats {
    double precision = 0.0;
    double class_coverage = 0.0;
};

/// Set-union statistics over rules sharing one target class.
RuleSetStats rule_set_stats(std::span<const Rule> rules, const EvaluationSet& eval);

/// Ranking used for output ordering: RMI desc, precision desc, length asc,
/// then the canonical rule order.
bool ranks_before(const ScoredRule& a, const ScoredRule& b);

/// Turns rules into text and JSON using the binning map's labels.
class RuleRenderer {
public:
    RuleRenderer(const BinningMap& bins, std::vector<std::string> class_order);

    const BinningMap& bins() const noexcept { return *bins_; }
    const std::vector<std::string>& class_order() const noexcept { return class_order_; }

    /// "petal-width < 0.80", "0.80 <= petal-length < 4.75", "safety = low",
    /// "persons ∈ {4, more}".
    std::string render(const Condition& c) const;
    /// "IF <cond> AND <cond> THEN Predict class: <class>".
    std::string render(const Rule& rule) const;

    nlohmann::json condition_json(const Condition& c) const;
    Condition condition_from_json(const nlohmann::json& j) const;

    nlohmann::json rule_json(const ScoredRule& r) const;
    ScoredRule rule_from_json(const nlohmann::json& j) const;

    std::size_t class_index(std::string_view name) const;

private:
    const BinningMap* bins_;
    std::vector<std::string> class_order_;
};

}  // namespace magix
