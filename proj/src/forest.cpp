#include "magix/forest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

#include "magix/error.hpp"
#include "magix/random.hpp"

namespace magix {

using nlohmann::json;

// ---------------------------------------------------------------- config

void ForestConfig::validate() const {
    if (tree_count < 1) throw ConfigError("forest: tree count must be at least 1");
    if (min_samples_split < 2) throw ConfigError("forest: min samples split must be at least 2");
    if (min_samples_leaf < 1) throw ConfigError("forest: min samples leaf must be at least 1");
}

json ForestConfig::to_json() const {
    json j{{"tree_count", tree_count},
           {"min_samples_split", min_samples_split},
           {"min_samples_leaf", min_samples_leaf},
           {"seed", seed}};
    j["max_depth"] = max_depth ? json(*max_depth) : json(nullptr);
    return j;
}

ForestConfig ForestConfig::from_json(const json& doc) {
    ForestConfig c;
    c.tree_count = doc.value("tree_count", c.tree_count);
    c.min_samples_split = doc.value("min_samples_split", c.min_samples_split);
    c.min_samples_leaf = doc.value("min_samples_leaf", c.min_samples_leaf);
    c.seed = doc.value("seed", c.seed);
    if (doc.contains("max_depth") && !doc["max_depth"].is_null()) c.max_depth = doc["max_depth"].get<std::size_t>();
    c.validate();
    return c;
}

// ---------------------------------------------------------------- tree

const std::vector<double>& DecisionTree::leaf(std::span<const double> x) const {
    std::size_t node = 0;
    while (feature[node] >= 0) {
        const double v = x[static_cast<std::size_t>(feature[node])];
        node = static_cast<std::size_t>(v <= threshold[node] ? left[node] : right[node]);
    }
    return distribution[node];
}

namespace {

struct TreeBuilder {
    const FeatureMatrix& x;
    const std::vector<std::size_t>& y;
    std::size_t classes;
    const ForestConfig& config;
    Rng rng;
    DecisionTree tree;

    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double impurity = 0.0;
        std::size_t left_count = 0;
    };

    static double gini(const std::vector<std::size_t>& counts, std::size_t n) {
        if (n == 0) return 0.0;
        double s = 0.0;
        for (auto c : counts) {
            const double p = static_cast<double>(c) / static_cast<double>(n);
            s += p * p;
        }
        return 1.0 - s;
    }

    int add_leaf(const std::vector<std::size_t>& counts, std::size_t n) {
        std::vector<double> dist(classes, 0.0);
        for (std::size_t c = 0; c < classes; ++c) dist[c] = static_cast<double>(counts[c]) / static_cast<double>(n);
        tree.feature.push_back(-1);
        tree.threshold.push_back(0.0);
        tree.left.push_back(-1);
        tree.right.push_back(-1);
        tree.distribution.push_back(std::move(dist));
        return static_cast<int>(tree.feature.size() - 1);
    }

    int add_internal(int feature, double threshold) {
        tree.feature.push_back(feature);
        tree.threshold.push_back(threshold);
        tree.left.push_back(-1);
        tree.right.push_back(-1);
        tree.distribution.emplace_back();
        return static_cast<int>(tree.feature.size() - 1);
    }

    // Best Gini split of `samples` on one feature; NaN sorts last and goes right.
    std::optional<Split> best_on_feature(std::vector<std::size_t>& samples, std::size_t f,
                                         const std::vector<std::size_t>& total) {
        auto key = [&](std::size_t i) {
            const double v = x.at(i, f);
            return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
        };
        std::sort(samples.begin(), samples.end(), [&](auto a, auto b) {
            const double va = key(a), vb = key(b);
            return va != vb ? va < vb : a < b;
        });
        const std::size_t n = samples.size();
        std::vector<std::size_t> left(classes, 0), right(classes, 0);
        std::optional<Split> best;
        for (std::size_t i = 1; i < n; ++i) {
            ++left[y[samples[i - 1]]];
            const double prev = key(samples[i - 1]), cur = key(samples[i]);
            if (!(prev < cur) || std::isinf(prev)) continue;
            if (i < config.min_samples_leaf || n - i < config.min_samples_leaf) continue;
            for (std::size_t c = 0; c < classes; ++c) right[c] = total[c] - left[c];
            const double imp = (static_cast<double>(i) * gini(left, i) + static_cast<double>(n - i) * gini(right, n - i)) /
                               static_cast<double>(n);
            if (!best || imp < best->impurity) {
                double thr = 0.5 * (prev + cur);
                if (std::isinf(cur)) thr = prev;  // everything finite left, NaN right
                if (!(thr < cur)) thr = prev;
                best = Split{static_cast<int>(f), thr, imp, i};
            }
        }
        return best;
    }

    int build(std::vector<std::size_t> samples, std::size_t depth) {
        const std::size_t n = samples.size();
        std::vector<std::size_t> counts(classes, 0);
        for (auto i : samples) ++counts[y[i]];
        const bool pure = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) <= 1;
        if (pure || n < config.min_samples_split || n < 2 * config.min_samples_leaf ||
            (config.max_depth && depth >= *config.max_depth))
            return add_leaf(counts, n);

        const std::size_t p = x.cols;
        const std::size_t mtry = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(p))));
        std::vector<std::size_t> features(p);
        std::iota(features.begin(), features.end(), 0);
        shuffle(features.begin(), features.end(), rng);

        // Examine mtry features; keep drawing past mtry only until a valid split exists.
        std::optional<Split> best;
        for (std::size_t k = 0; k < p; ++k) {
            if (k >= mtry && best) break;
            auto s = best_on_feature(samples, features[k], counts);
            if (s && (!best || s->impurity < best->impurity)) best = s;
        }
        if (!best) return add_leaf(counts, n);

        const auto f = static_cast<std::size_t>(best->feature);
        std::vector<std::size_t> left, right;
        for (auto i : samples) {
            const double v = x.at(i, f);
            (v <= best->threshold ? left : right).push_back(i);
        }
        if (left.empty() || right.empty()) return add_leaf(counts, n);
        const int node = add_internal(best->feature, best->threshold);
        const int l = build(std::move(left), depth + 1);
        tree.left[static_cast<std::size_t>(node)] = l;
        const int r = build(std::move(right), depth + 1);
        tree.right[static_cast<std::size_t>(node)] = r;
        return node;
    }
};

}  // namespace

// ---------------------------------------------------------------- forest

RandomForest::RandomForest(std::vector<std::string> class_order, std::size_t feature_count,
                           std::vector<DecisionTree> trees, ForestConfig config)
    : class_order_(std::move(class_order)), feature_count_(feature_count), trees_(std::move(trees)),
      config_(config) {
    if (class_order_.empty()) throw ConfigError("forest: empty class order");
    if (trees_.empty()) throw ConfigError("forest: no trees");
    std::vector<std::string> sorted = class_order_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw ConfigError("forest: duplicate class in class order");
}

RandomForest RandomForest::train(const FeatureMatrix& x, const std::vector<std::size_t>& labels,
                                 std::vector<std::string> class_order, const ForestConfig& config,
                                 const ExecPolicy& exec) {
    config.validate();
    if (labels.size() != x.rows) throw ConfigError("forest: label count differs from row count");
    if (x.rows == 0) throw ConfigError("forest: empty training set");
    const std::size_t k = class_order.size();
    std::vector<std::size_t> present(k, 0);
    for (auto l : labels) {
        if (l >= k) throw ConfigError("forest: label index outside class order");
        ++present[l];
    }
    if (std::count_if(present.begin(), present.end(), [](auto c) { return c > 0; }) < 2)
        throw ConfigError("forest: training labels contain a single class; nothing to classify");

    std::vector<DecisionTree> trees(config.tree_count);
    parallel_for(exec, config.tree_count, [&](std::size_t t) {
        TreeBuilder builder{x, labels, k, config, make_rng(derive_seed(config.seed, "tree", t)), {}};
        std::vector<std::size_t> sample(x.rows);
        for (auto& s : sample) s = uniform_index(builder.rng, x.rows);
        builder.build(std::move(sample), 0);
        trees[t] = std::move(builder.tree);
    });
    return RandomForest(std::move(class_order), x.cols, std::move(trees), config);
}

RandomForest RandomForest::train(const Dataset& data, const ForestConfig& config, const ExecPolicy& exec) {
    auto order = data.label_values();
    std::sort(order.begin(), order.end());
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < order.size(); ++i) index[order[i]] = i;
    std::vector<std::size_t> y;
    y.reserve(data.rows());
    for (const auto& l : data.labels()) y.push_back(index.at(l));
    return train(data.matrix(), y, std::move(order), config, exec);
}

ProbabilityMatrix RandomForest::predict_proba(const FeatureMatrix& instances, const ExecPolicy& exec) const {
    const std::size_t k = class_order_.size();
    ProbabilityMatrix out(instances.rows, k);
    const double scale = 1.0 / static_cast<double>(trees_.size());
    parallel_for(exec, instances.rows, [&](std::size_t i) {
        auto row = out.row(i);
        const auto x = instances.row(i);
        for (const auto& tree : trees_) {
            const auto& d = tree.leaf(x);
            for (std::size_t c = 0; c < k; ++c) row[c] += d[c];
        }
        for (auto& v : row) v *= scale;
    });
    return out;
}

json RandomForest::to_json() const {
    json trees = json::array();
    for (const auto& t : trees_) {
        json leaf_values = json::array();
        for (const auto& d : t.distribution) leaf_values.push_back(d);
        trees.push_back({{"feature", t.feature},
                         {"threshold", t.threshold},
                         {"left", t.left},
                         {"right", t.right},
                         {"value", leaf_values}});
    }
    return json{{"format", "magix-forest"},
                {"version", 1},
                {"class_order", class_order_},
                {"feature_count", feature_count_},
                {"config", config_.to_json()},
                {"trees", trees}};
}

RandomForest RandomForest::from_json(const json& doc) {
    try {
        if (doc.at("format") != "magix-forest") throw ParseError("not a forest document");
        if (doc.at("version").get<int>() != 1) throw ParseError("unsupported forest version");
        std::vector<DecisionTree> trees;
        const auto k = doc.at("class_order").size();
        const auto p = doc.at("feature_count").get<std::size_t>();
        for (const auto& jt : doc.at("trees")) {
            DecisionTree t;
            t.feature = jt.at("feature").get<std::vector<int>>();
            t.threshold = jt.at("threshold").get<std::vector<double>>();
            t.left = jt.at("left").get<std::vector<int>>();
            t.right = jt.at("right").get<std::vector<int>>();
            t.distribution = jt.at("value").get<std::vector<std::vector<double>>>();
            const auto n = t.feature.size();
            if (t.threshold.size() != n || t.left.size() != n || t.right.size() != n || t.distribution.size() != n || n == 0)
                throw ParseError("ragged tree arrays");
            for (std::size_t i = 0; i < n; ++i) {
                if (t.feature[i] < 0) {
                    if (t.distribution[i].size() != k) throw ParseError("leaf distribution length differs from class count");
                } else if (static_cast<std::size_t>(t.feature[i]) >= p || t.left[i] <= static_cast<int>(i) ||
                           t.right[i] <= static_cast<int>(i) || static_cast<std::size_t>(t.left[i]) >= n ||
                           static_cast<std::size_t>(t.right[i]) >= n) {
                    throw ParseError("invalid node " + std::to_string(i));
                }
            }
            trees.push_back(std::move(t));
        }
        return RandomForest(doc.at("class_order").get<std::vector<std::string>>(), p, std::move(trees),
                            ForestConfig::from_json(doc.at("config")));
    } catch (const json::exception& e) {
        throw ParseError(std::string("forest document: ") + e.what());
    }
}

void RandomForest::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << to_json().dump() << '\n';
}

RandomForest RandomForest::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot read " + path.string());
    try {
        return from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

}  // namespace magix
