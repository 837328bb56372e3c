#include "magix/binning.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <set>

#include "magix/error.hpp"

namespace magix {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double entropy_bits(std::span<const std::size_t> counts, std::size_t total) {
    if (total == 0) return 0.0;
    double h = 0.0;
    for (auto c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / static_cast<double>(total);
        h -= p * std::log2(p);
    }
    return h;
}

std::size_t distinct_count(std::span<const std::size_t> counts) {
    return static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }));
}

struct SortedColumn {
    std::vector<double> values;
    std::vector<int> classes;
    int class_count = 0;
};

struct Candidate {
    std::size_t lo = 0, hi = 0;  // range [lo, hi) of the sorted column
    std::size_t split = 0;       // first index of the right half
    double gain = 0.0;
};

// Best boundary cut in [lo, hi) and whether the MDL criterion accepts it.
std::optional<Candidate> best_split(const SortedColumn& col, std::size_t lo, std::size_t hi) {
    const std::size_t n = hi - lo;
    if (n < 2) return std::nullopt;
    const auto k = static_cast<std::size_t>(col.class_count);

    std::vector<std::size_t> total(k, 0);
    for (std::size_t i = lo; i < hi; ++i) ++total[static_cast<std::size_t>(col.classes[i])];
    const double ent = entropy_bits(total, n);

    std::vector<std::size_t> left(k, 0), right(k, 0);
    std::optional<Candidate> best;
    double best_weighted = kInf;
    std::vector<std::size_t> best_left, best_right;
    for (std::size_t i = lo + 1; i < hi; ++i) {
        ++left[static_cast<std::size_t>(col.classes[i - 1])];
        if (col.values[i] == col.values[i - 1]) continue;
        for (std::size_t c = 0; c < k; ++c) right[c] = total[c] - left[c];
        const std::size_t nl = i - lo, nr = hi - i;
        const double weighted = (static_cast<double>(nl) * entropy_bits(left, nl) +
                                 static_cast<double>(nr) * entropy_bits(right, nr)) /
                                static_cast<double>(n);
        // Strict comparison keeps the lowest cut among equal-entropy choices.
        if (weighted < best_weighted - 1e-12) {
            best_weighted = weighted;
            best = Candidate{lo, hi, i, ent - weighted};
            best_left = left;
            best_right = right;
        }
    }
    if (!best) return std::nullopt;

    const double nn = static_cast<double>(n);
    const double k0 = static_cast<double>(distinct_count(total));
    const double k1 = static_cast<double>(distinct_count(best_left));
    const double k2 = static_cast<double>(distinct_count(best_right));
    const std::size_t nl = best->split - lo, nr = hi - best->split;
    const double delta = std::log2(std::pow(3.0, k0) - 2.0) -
                         (k0 * ent - k1 * entropy_bits(best_left, nl) - k2 * entropy_bits(best_right, nr));
    const double threshold = (std::log2(nn - 1.0) + delta) / nn;
    if (best->gain <= threshold) return std::nullopt;
    return best;
}

struct CandidateOrder {
    const SortedColumn* col;
    bool operator()(const Candidate& a, const Candidate& b) const {
        if (a.gain != b.gain) return a.gain < b.gain;
        return col->values[a.split] > col->values[b.split];
    }
};

int precision_for_unique_labels(std::vector<double> bounds) {
    std::sort(bounds.begin(), bounds.end());
    bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());
    for (int precision = 2; precision <= 8; ++precision) {
        std::set<std::string> seen;
        bool unique = true;
        for (double b : bounds) unique = unique && seen.insert(format_bound(b, precision)).second;
        if (unique) return precision;
    }
    return 10;
}

std::vector<std::string> numeric_labels(const std::string& name, const std::vector<double>& cuts, double lo,
                                        double hi, int p) {
    std::vector<std::string> labels;
    if (cuts.empty()) {
        labels.push_back(format_bound(lo, p) + " <= " + name + " <= " + format_bound(hi, p));
        return labels;
    }
    for (std::size_t b = 0; b <= cuts.size(); ++b) {
        const double l = b == 0 ? lo : cuts[b - 1];
        if (b == cuts.size())
            labels.push_back(format_bound(l, p) + " <= " + name + " <= " + format_bound(hi, p));
        else
            labels.push_back(format_bound(l, p) + " <= " + name + " < " + format_bound(cuts[b], p));
    }
    return labels;
}

}  // namespace

std::string format_bound(double value, int precision) {
    if (std::abs(value) < 0.5 * std::pow(10.0, -precision)) value = 0.0;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, value);
    return buf;
}

// ---------------------------------------------------------------- ColumnBins

int ColumnBins::numeric_bin(double value, bool* clamped) const {
    if (is_missing(value)) return -1;
    if (clamped) *clamped = value < observed_min || value > observed_max;
    return static_cast<int>(std::upper_bound(cuts.begin(), cuts.end(), value) - cuts.begin());
}

int ColumnBins::category_bin(std::string_view category) const {
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == category) return static_cast<int>(i);
    return -1;
}

double ColumnBins::lower_bound(std::size_t bin) const { return bin == 0 ? -kInf : cuts.at(bin - 1); }
double ColumnBins::upper_bound(std::size_t bin) const { return bin >= cuts.size() ? kInf : cuts[bin]; }

// ---------------------------------------------------------------- BinningMap

BinningMap::BinningMap(std::vector<ColumnBins> columns) : columns_(std::move(columns)) {
    for (const auto& c : columns_) {
        if (c.labels.empty()) throw ConfigError("binning: column '" + c.name + "' has no bins");
        if (c.numeric()) {
            if (c.labels.size() != c.cuts.size() + 1)
                throw ConfigError("binning: column '" + c.name + "' label count does not match its cut points");
            for (std::size_t i = 1; i < c.cuts.size(); ++i)
                if (!(c.cuts[i - 1] < c.cuts[i]))
                    throw ConfigError("binning: cut points of '" + c.name + "' are not strictly increasing");
        }
    }
}

std::optional<std::size_t> BinningMap::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i)
        if (columns_[i].name == name) return i;
    return std::nullopt;
}

json BinningMap::to_json() const {
    json cols = json::array();
    for (const auto& c : columns_) {
        json j{{"name", c.name}, {"kind", to_string(c.kind)}, {"labels", c.labels}};
        if (c.numeric()) {
            j["cuts"] = c.cuts;
            j["min"] = c.observed_min;
            j["max"] = c.observed_max;
            j["precision"] = c.precision;
        }
        cols.push_back(std::move(j));
    }
    return json{{"columns", cols}};
}

BinningMap BinningMap::from_json(const json& doc) {
    std::vector<ColumnBins> cols;
    try {
        for (const auto& j : doc.at("columns")) {
            ColumnBins c;
            c.name = j.at("name").get<std::string>();
            c.kind = column_kind_from_string(j.at("kind").get<std::string>());
            c.labels = j.at("labels").get<std::vector<std::string>>();
            if (c.numeric()) {
                c.cuts = j.at("cuts").get<std::vector<double>>();
                c.observed_min = j.at("min").get<double>();
                c.observed_max = j.at("max").get<double>();
                c.precision = j.value("precision", 2);
            }
            cols.push_back(std::move(c));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("binning document: ") + e.what());
    }
    return BinningMap(std::move(cols));
}

bool operator==(const BinningMap& a, const BinningMap& b) {
    if (a.columns_.size() != b.columns_.size()) return false;
    for (std::size_t i = 0; i < a.columns_.size(); ++i) {
        const auto& x = a.columns_[i];
        const auto& y = b.columns_[i];
        if (x.name != y.name || x.kind != y.kind || x.cuts != y.cuts || x.labels != y.labels) return false;
        if (x.numeric() && (x.observed_min != y.observed_min || x.observed_max != y.observed_max)) return false;
    }
    return true;
}

// ---------------------------------------------------------------- fitting

std::vector<double> mdlp_cut_points(std::span<const double> values, std::span<const int> classes,
                                    std::size_t max_bins) {
    if (values.size() != classes.size()) throw ConfigError("mdlp: values and classes differ in length");
    if (max_bins < 2) throw ConfigError("mdlp: max_bins must be at least 2");
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) {
        return values[a] != values[b] ? values[a] < values[b] : classes[a] < classes[b];
    });
    SortedColumn col;
    col.values.reserve(order.size());
    col.classes.reserve(order.size());
    for (auto i : order) {
        col.values.push_back(values[i]);
        col.classes.push_back(classes[i]);
        col.class_count = std::max(col.class_count, classes[i] + 1);
    }

    std::priority_queue<Candidate, std::vector<Candidate>, CandidateOrder> queue(CandidateOrder{&col});
    if (auto c = best_split(col, 0, col.values.size())) queue.push(*c);
    std::vector<double> cuts;
    while (!queue.empty() && cuts.size() + 1 < max_bins) {
        const auto c = queue.top();
        queue.pop();
        cuts.push_back(0.5 * (col.values[c.split - 1] + col.values[c.split]));
        if (auto l = best_split(col, c.lo, c.split)) queue.push(*l);
        if (auto r = best_split(col, c.split, c.hi)) queue.push(*r);
    }
    std::sort(cuts.begin(), cuts.end());
    return cuts;
}

std::vector<double> quartile_cut_points(std::span<const double> values, std::size_t max_bins) {
    if (values.empty()) return {};
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double lo = sorted.front(), hi = sorted.back();
    std::vector<double> cuts;
    for (double q : {0.25, 0.5, 0.75}) {
        const double pos = q * static_cast<double>(sorted.size() - 1);
        const auto i = static_cast<std::size_t>(std::floor(pos));
        const double frac = pos - static_cast<double>(i);
        const double v = i + 1 < sorted.size() ? sorted[i] + frac * (sorted[i + 1] - sorted[i]) : sorted[i];
        if (v > lo && v <= hi && (cuts.empty() || v > cuts.back())) cuts.push_back(v);
    }
    if (cuts.size() + 1 > max_bins) cuts.resize(max_bins - 1);
    return cuts;
}

BinningMap fit_entropy_bins(const Dataset& data, const std::vector<std::string>& labels, std::size_t max_bins) {
    if (labels.size() != data.rows()) throw ConfigError("binning: label count differs from row count");
    if (max_bins < 2) throw ConfigError("binning: max_bins must be at least 2");

    std::map<std::string, int> class_ids;
    for (const auto& l : labels) class_ids.try_emplace(l, static_cast<int>(class_ids.size()));
    std::vector<int> class_of(labels.size());
    // Ids follow sorted label order so the result ignores row order.
    int next = 0;
    for (auto& [label, id] : class_ids) id = next++;
    for (std::size_t i = 0; i < labels.size(); ++i) class_of[i] = class_ids[labels[i]];

    std::vector<ColumnBins> out;
    for (std::size_t j = 0; j < data.feature_count(); ++j) {
        const auto& col = data.column(j);
        ColumnBins bins;
        bins.name = col.name();
        bins.kind = col.spec.kind;
        if (!col.numeric()) {
            bins.labels = col.categories;
            out.push_back(std::move(bins));
            continue;
        }
        std::vector<double> values;
        std::vector<int> classes;
        for (std::size_t i = 0; i < data.rows(); ++i) {
            if (is_missing(col.values[i])) continue;
            values.push_back(col.values[i]);
            classes.push_back(class_of[i]);
        }
        if (values.empty()) {
            bins.labels = {bins.name + " (no data)"};
            out.push_back(std::move(bins));
            continue;
        }
        const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
        bins.observed_min = *mn;
        bins.observed_max = *mx;
        if (*mn < *mx) {
            bins.cuts = mdlp_cut_points(values, classes, max_bins);
            if (bins.cuts.empty()) bins.cuts = quartile_cut_points(values, max_bins);
        }
        std::vector<double> bounds{bins.observed_min};
        bounds.insert(bounds.end(), bins.cuts.begin(), bins.cuts.end());
        bounds.push_back(bins.observed_max);
        bins.precision = precision_for_unique_labels(bins.cuts.empty() ? std::vector<double>{} : bounds);
        bins.labels = numeric_labels(bins.name, bins.cuts, bins.observed_min, bins.observed_max, bins.precision);
        out.push_back(std::move(bins));
    }
    return BinningMap(std::move(out));
}

BinnedData apply_bins(const Dataset& data, const BinningMap& bins) {
    BinnedData out;
    out.rows = data.rows();
    out.codes.resize(bins.size());
    for (std::size_t b = 0; b < bins.size(); ++b) {
        const auto& cb = bins.column(b);
        const auto j = data.column_index(cb.name);
        if (!j) throw ConfigError("binning: dataset lacks column '" + cb.name + "'");
        const auto& col = data.column(*j);
        if (col.spec.kind != cb.kind) throw ConfigError("binning: column '" + cb.name + "' changed kind");
        auto& codes = out.codes[b];
        codes.resize(data.rows());
        if (cb.numeric()) {
            for (std::size_t i = 0; i < data.rows(); ++i) {
                bool clamped = false;
                codes[i] = cb.numeric_bin(col.values[i], &clamped);
                if (clamped) ++out.clamped;
            }
        } else {
            // Category indices differ between independently loaded files; map by name.
            std::vector<int> remap(col.categories.size());
            for (std::size_t c = 0; c < col.categories.size(); ++c) remap[c] = cb.category_bin(col.categories[c]);
            for (std::size_t i = 0; i < data.rows(); ++i) {
                const double v = col.values[i];
                if (is_missing(v)) {
                    codes[i] = -1;
                    continue;
                }
                codes[i] = remap[static_cast<std::size_t>(v)];
                if (codes[i] < 0) ++out.unseen;
            }
        }
    }
    return out;
}

}  // namespace magix
