#include "magix/rules.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "magix/error.hpp"

namespace magix {

using nlohmann::json;

// ---------------------------------------------------------------- Condition / Rule

Condition::Condition(std::size_t attr, std::vector<int> vals) : attribute(attr), values(std::move(vals)) {
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    if (values.empty()) throw ConfigError("condition without allowed values");
}

bool Condition::satisfied_by(int code) const noexcept {
    return code >= 0 && std::binary_search(values.begin(), values.end(), code);
}

Rule::Rule(std::vector<Condition> conds, std::size_t target) : target_class(target) {
    std::map<std::size_t, std::vector<int>> merged;
    for (auto& c : conds) {
        auto& v = merged[c.attribute];
        v.insert(v.end(), c.values.begin(), c.values.end());
    }
    for (auto& [attr, vals] : merged) conditions.emplace_back(attr, std::move(vals));
}

bool Rule::covers(const BinnedData& data, std::size_t row) const {
    for (const auto& c : conditions) {
        if (c.attribute >= data.columns()) throw ConfigError("rule references unknown attribute " + std::to_string(c.attribute));
        if (!c.satisfied_by(data.code(row, c.attribute))) return false;
    }
    return true;
}

// ---------------------------------------------------------------- labels / index

ModelLabels::ModelLabels(std::vector<std::size_t> pred, std::size_t class_count)
    : predicted(std::move(pred)), class_rows(class_count, RowSet(predicted.size())) {
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i] >= class_count) throw ConfigError("model label outside class order");
        class_rows[predicted[i]].set(i);
    }
}

CoverIndex::CoverIndex(const BinnedData& data) : data_(&data), rows_(data.rows), empty_(data.rows) {
    value_rows_.resize(data.columns());
    for (std::size_t j = 0; j < data.columns(); ++j) {
        int max_code = -1;
        for (int c : data.codes[j]) max_code = std::max(max_code, c);
        auto& sets = value_rows_[j];
        sets.assign(static_cast<std::size_t>(max_code + 1), RowSet(rows_));
        for (std::size_t i = 0; i < rows_; ++i)
            if (const int c = data.codes[j][i]; c >= 0) sets[static_cast<std::size_t>(c)].set(i);
    }
}

const RowSet& CoverIndex::value_rows(std::size_t attribute, int bin) const {
    if (attribute >= value_rows_.size()) throw ConfigError("rule references unknown attribute " + std::to_string(attribute));
    const auto& sets = value_rows_[attribute];
    if (bin < 0 || static_cast<std::size_t>(bin) >= sets.size()) return empty_;
    return sets[static_cast<std::size_t>(bin)];
}

RowSet CoverIndex::condition_cover(const Condition& c) const {
    RowSet out(rows_);
    for (int v : c.values) out |= value_rows(c.attribute, v);
    return out;
}

RowSet CoverIndex::cover(const Rule& rule) const {
    RowSet out(rows_, true);
    for (const auto& c : rule.conditions) out &= condition_cover(c);
    return out;
}

EvaluationSet::EvaluationSet(BinnedData binned, ModelLabels model_labels)
    : data(std::move(binned)), labels(std::move(model_labels)), index(data) {
    if (labels.rows() != data.rows) throw ConfigError("model labels not aligned with binned rows");
}

// ---------------------------------------------------------------- statistics

RowSet cover(const Rule& rule, const EvaluationSet& eval) { return eval.index.cover(rule); }

RowSet cover_reference(const Rule& rule, const BinnedData& data) {
    RowSet out(data.rows);
    for (std::size_t i = 0; i < data.rows; ++i)
        if (rule.covers(data, i)) out.set(i);
    return out;
}

ContingencyTable contingency(const RowSet& cover, const ModelLabels& labels, std::size_t target_class) {
    const auto& cls = labels.class_rows.at(target_class);
    ContingencyTable t;
    t.n11 = cover.intersection_count(cls);
    t.n12 = cover.count() - t.n11;
    t.n13 = cls.count() - t.n11;
    t.n14 = labels.rows() - t.n11 - t.n12 - t.n13;
    return t;
}

ContingencyTable contingency(const Rule& rule, const EvaluationSet& eval) {
    return contingency(cover(rule, eval), eval.labels, rule.target_class);
}

double rmi(const ContingencyTable& t) {
    const auto n = static_cast<double>(t.total());
    if (t.total() == 0) throw ConfigError("rmi: empty contingency table");
    const double cells[2][2] = {{static_cast<double>(t.n11), static_cast<double>(t.n12)},
                                {static_cast<double>(t.n13), static_cast<double>(t.n14)}};
    const double row[2] = {cells[0][0] + cells[0][1], cells[1][0] + cells[1][1]};
    const double col[2] = {cells[0][0] + cells[1][0], cells[0][1] + cells[1][1]};
    double mi = 0.0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            const double c = cells[a][b];
            if (c == 0.0) continue;
            mi += (c / n) * std::log(c * n / (row[a] * col[b]));
        }
    mi = std::max(mi, 0.0);
    // Cross-product form of n11 >= n12*n13/n14, defined when n14 == 0.
    const bool positive = static_cast<long double>(t.n11) * static_cast<long double>(t.n14) >=
                          static_cast<long double>(t.n12) * static_cast<long double>(t.n13);
    return positive ? mi : -mi;
}

RuleStats rule_stats(const ContingencyTable& t, std::size_t length) {
    RuleStats s;
    s.cover_count = t.n11 + t.n12;
    s.correct_cover_count = t.n11;
    s.length = length;
    s.precision = s.cover_count == 0 ? 0.0 : static_cast<double>(t.n11) / static_cast<double>(s.cover_count);
    const auto cls = t.n11 + t.n13;
    s.class_coverage = cls == 0 ? 0.0 : static_cast<double>(t.n11) / static_cast<double>(cls);
    s.rmi = t.total() == 0 ? 0.0 : rmi(t);
    return s;
}

RuleStats rule_stats(const Rule& rule, const EvaluationSet& eval) {
    return rule_stats(contingency(rule, eval), rule.length());
}

ScoredRule score(const Rule& rule, const EvaluationSet& eval) { return {rule, rule_stats(rule, eval), std::nullopt}; }

RuleSetStats rule_set_stats(std::span<const Rule> rules, const EvaluationSet& eval) {
    RuleSetStats out;
    if (rules.empty()) return out;
    const auto target = rules.front().target_class;
    RowSet all(eval.rows());
    for (const auto& r : rules) {
        if (r.target_class != target) throw ConfigError("rule set mixes target classes");
        all |= cover(r, eval);
    }
    const auto& cls = eval.labels.class_rows.at(target);
    const auto correct = all.intersection_count(cls);
    const auto covered = all.count();
    out.precision = covered == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(covered);
    out.class_coverage = cls.count() == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(cls.count());
    return out;
}

bool ranks_before(const ScoredRule& a, const ScoredRule& b) {
    if (a.stats.rmi != b.stats.rmi) return a.stats.rmi > b.stats.rmi;
    if (a.stats.precision != b.stats.precision) return a.stats.precision > b.stats.precision;
    if (a.rule.length() != b.rule.length()) return a.rule.length() < b.rule.length();
    return a.rule < b.rule;
}

// ---------------------------------------------------------------- rendering

RuleRenderer::RuleRenderer(const BinningMap& bins, std::vector<std::string> class_order)
    : bins_(&bins), class_order_(std::move(class_order)) {}

std::string RuleRenderer::render(const Condition& c) const {
    const auto& col = bins_->column(c.attribute);
    if (!col.numeric()) {
        if (c.values.size() == 1) return col.name + " = " + col.labels.at(static_cast<std::size_t>(c.values.front()));
        std::string out = col.name + " ∈ {";
        for (std::size_t i = 0; i < c.values.size(); ++i) {
            if (i) out += ", ";
            out += col.labels.at(static_cast<std::size_t>(c.values[i]));
        }
        return out + "}";
    }
    // Contiguous bins merge into one interval.
    std::vector<std::string> parts;
    for (std::size_t i = 0; i < c.values.size();) {
        std::size_t j = i;
        while (j + 1 < c.values.size() && c.values[j + 1] == c.values[j] + 1) ++j;
        const double lo = col.lower_bound(static_cast<std::size_t>(c.values[i]));
        const double hi = col.upper_bound(static_cast<std::size_t>(c.values[j]));
        const bool open_lo = std::isinf(lo), open_hi = std::isinf(hi);
        if (open_lo && open_hi) parts.push_back(col.name + " is any value");
        else if (open_lo) parts.push_back(col.name + " < " + format_bound(hi, col.precision));
        else if (open_hi) parts.push_back(col.name + " >= " + format_bound(lo, col.precision));
        else
            parts.push_back(format_bound(lo, col.precision) + " <= " + col.name + " < " + format_bound(hi, col.precision));
        i = j + 1;
    }
    if (parts.size() == 1) return parts.front();
    std::string out = "(";
    for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? " OR " : "") + parts[i];
    return out + ")";
}

std::string RuleRenderer::render(const Rule& rule) const {
    std::string out = "IF ";
    for (std::size_t i = 0; i < rule.conditions.size(); ++i) {
        if (i) out += " AND ";
        out += render(rule.conditions[i]);
    }
    return out + " THEN Predict class: " + class_order_.at(rule.target_class);
}

json RuleRenderer::condition_json(const Condition& c) const {
    const auto& col = bins_->column(c.attribute);
    json values = json::array();
    for (int v : c.values) values.push_back(col.labels.at(static_cast<std::size_t>(v)));
    return json{{"attribute", col.name}, {"values", values}};
}

Condition RuleRenderer::condition_from_json(const json& j) const {
    const auto name = j.at("attribute").get<std::string>();
    const auto attr = bins_->index_of(name);
    if (!attr) throw ParseError("rule condition on unknown attribute '" + name + "'");
    const auto& col = bins_->column(*attr);
    std::vector<int> values;
    for (const auto& v : j.at("values")) {
        const auto label = v.get<std::string>();
        const auto it = std::find(col.labels.begin(), col.labels.end(), label);
        if (it == col.labels.end()) throw ParseError("unknown bin '" + label + "' for attribute '" + name + "'");
        values.push_back(static_cast<int>(it - col.labels.begin()));
    }
    if (values.empty()) throw ParseError("condition on '" + name + "' has no values");
    return Condition(*attr, std::move(values));
}

std::size_t RuleRenderer::class_index(std::string_view name) const {
    for (std::size_t i = 0; i < class_order_.size(); ++i)
        if (class_order_[i] == name) return i;
    throw ParseError("unknown class '" + std::string(name) + "'");
}

json RuleRenderer::rule_json(const ScoredRule& r) const {
    json conds = json::array();
    for (const auto& c : r.rule.conditions) conds.push_back(condition_json(c));
    json j{{"class", class_order_.at(r.rule.target_class)},
           {"conditions", conds},
           {"length", r.stats.length},
           {"cover_count", r.stats.cover_count},
           {"correct_cover_count", r.stats.correct_cover_count},
           {"precision", r.stats.precision},
           {"coverage", r.stats.class_coverage},
           {"rmi", r.stats.rmi}};
    j["test_precision"] = r.test_precision ? json(*r.test_precision) : json(nullptr);
    j["text"] = render(r.rule);
    return j;
}

ScoredRule RuleRenderer::rule_from_json(const json& j) const {
    try {
        std::vector<Condition> conds;
        for (const auto& c : j.at("conditions")) conds.push_back(condition_from_json(c));
        if (conds.empty()) throw ParseError("rule without conditions");
        ScoredRule r;
        r.rule = Rule(std::move(conds), class_index(j.at("class").get<std::string>()));
        r.stats.length = r.rule.length();
        r.stats.cover_count = j.value("cover_count", std::size_t{0});
        r.stats.correct_cover_count = j.value("correct_cover_count", std::size_t{0});
        r.stats.precision = j.at("precision").get<double>();
        r.stats.class_coverage = j.value("coverage", 0.0);
        r.stats.rmi = j.at("rmi").get<double>();
        if (j.contains("test_precision") && !j["test_precision"].is_null())
            r.test_precision = j["test_precision"].get<double>();
        return r;
    } catch (const json::exception& e) {
        throw ParseError(std::string("rule document: ") + e.what());
    }
}

}  // namespace magix
