#include "magix/local_explain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "magix/error.hpp"
#include "magix/log.hpp"
#include "magix/random.hpp"

namespace magix {

using nlohmann::json;

void LimeConfig::validate() const {
    if (sample_count < 100) throw ConfigError("lime.sample-count must be at least 100");
    if (top_m < 1) throw ConfigError("lime.top-m must be at least 1");
    if (kernel_width && !(*kernel_width > 0.0)) throw ConfigError("lime.kernel-width must be positive");
    if (!(ridge_lambda >= 0.0)) throw ConfigError("lime.ridge-lambda must be non-negative");
}

double LimeConfig::width_for(std::size_t features) const {
    return kernel_width ? *kernel_width : 0.75 * std::sqrt(static_cast<double>(features));
}

json LimeConfig::to_json() const {
    return json{{"sample_count", sample_count},
                {"kernel_width", kernel_width ? json(*kernel_width) : json(nullptr)},
                {"ridge_lambda", ridge_lambda},
                {"top_m", top_m}};
}

LimeConfig LimeConfig::from_json(const json& doc) {
    LimeConfig c;
    c.sample_count = doc.value("sample_count", c.sample_count);
    if (doc.contains("kernel_width") && !doc["kernel_width"].is_null()) c.kernel_width = doc["kernel_width"].get<double>();
    c.ridge_lambda = doc.value("ridge_lambda", c.ridge_lambda);
    c.top_m = doc.value("top_m", c.top_m);
    return c;
}

LimeExplainer::LimeExplainer(const Classifier& model, const Dataset& background, const BinnedData& background_codes,
                             LimeConfig config)
    : model_(&model), background_(&background), codes_(&background_codes), config_(std::move(config)),
      features_(background.feature_count()) {
    config_.validate();
    if (background.rows() == 0) throw ConfigError("local surrogate needs at least one background row");
    if (background_codes.rows != background.rows() || background_codes.columns() != features_)
        throw ConfigError("binned background does not match the raw background");
}

namespace {

// Weighted ridge on centered data; returns one coefficient per column of z.
std::vector<double> weighted_ridge(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                                   double lambda) {
    const double wsum = w.sum();
    const Eigen::RowVectorXd zmean = (w.transpose() * z) / wsum;
    const double ymean = w.dot(y) / wsum;
    const Eigen::MatrixXd zc = z.rowwise() - zmean;
    const Eigen::VectorXd yc = y.array() - ymean;
    const Eigen::MatrixXd zw = zc.array().colwise() * w.array();
    Eigen::MatrixXd a = zw.transpose() * zc;
    a.diagonal().array() += lambda;
    const Eigen::VectorXd b = zw.transpose() * yc;
    const Eigen::VectorXd beta = a.ldlt().solve(b);
    return {beta.data(), beta.data() + beta.size()};
}

}  // namespace

std::vector<double> LimeExplainer::marginal_contributions(std::span<const double> x, std::span<const int> x_codes,
                                                          std::size_t target_class, std::uint64_t seed) const {
    const std::size_t p = features_;
    if (x.size() != p || x_codes.size() != p) throw ConfigError("instance does not match the feature count");
    if (target_class >= model_->class_order().size()) throw ConfigError("target class outside the model's class order");

    const std::size_t n = config_.sample_count;
    const std::size_t pool = background_->rows();
    auto rng = make_rng(seed);

    FeatureMatrix samples(n, p);
    Eigen::MatrixXd z(n, p);
    Eigen::VectorXd hamming(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t kept = 0;
        for (std::size_t j = 0; j < p; ++j) {
            const auto r = static_cast<std::size_t>(uniform_index(rng, pool));
            samples.at(i, j) = background_->value(r, j);
            const bool same = codes_->code(r, j) == x_codes[j];
            z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = same ? 1.0 : 0.0;
            kept += same;
        }
        hamming(static_cast<Eigen::Index>(i)) = static_cast<double>(p - kept);
    }

    const auto proba = predict_proba(*model_, samples);
    Eigen::VectorXd y(n);
    for (std::size_t i = 0; i < n; ++i) y(static_cast<Eigen::Index>(i)) = proba.row(i)[target_class];

    double width = config_.width_for(p);
    for (int attempt = 0; attempt < 2; ++attempt, width *= 2.0) {
        const Eigen::VectorXd w = (-(hamming.array().square()) / (width * width)).exp();
        if (w.sum() > 1e-9) return weighted_ridge(z, y, w, config_.ridge_lambda);
    }
    throw Error("local surrogate weights are degenerate even after widening the kernel");
}

std::vector<Condition> LimeExplainer::conditions_for_instance(std::span<const double> x, std::span<const int> x_codes,
                                                              std::size_t target_class, std::uint64_t seed) const {
    const auto beta = marginal_contributions(x, x_codes, target_class, seed);
    std::vector<std::size_t> order;
    for (std::size_t j = 0; j < beta.size(); ++j)
        if (beta[j] > 0.0 && x_codes[j] >= 0) order.push_back(j);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return beta[a] > beta[b]; });
    if (order.size() > config_.top_m) order.resize(config_.top_m);
    std::vector<Condition> out;
    out.reserve(order.size());
    for (auto j : order) out.emplace_back(j, std::vector<int>{x_codes[j]});
    return out;
}

std::vector<Condition> LimeExplainer::conditions_for_row(std::size_t row, std::size_t target_class,
                                                         std::uint64_t seed) const {
    const auto x = background_->instance(row);
    std::vector<int> codes(features_);
    for (std::size_t j = 0; j < features_; ++j) codes[j] = codes_->code(row, j);
    return conditions_for_instance(x, codes, target_class, seed);
}

std::vector<std::vector<Condition>> explain_rows(const LimeExplainer& explainer, std::span<const std::size_t> rows,
                                                 std::size_t target_class, std::uint64_t seed,
                                                 const ExecPolicy& exec) {
    std::vector<std::vector<Condition>> out(rows.size());
    parallel_for(exec, rows.size(), [&](std::size_t i) {
        out[i] = explainer.conditions_for_row(rows[i], target_class, derive_seed(seed, "lime", rows[i]));
    });
    return out;
}

InstanceConditions gen_inst_conds(const LimeExplainer& explainer, const EvaluationSet& train,
                                  std::size_t target_class, std::uint64_t seed, const ExecPolicy& exec) {
    if (target_class >= train.labels.class_count()) throw ConfigError("target class outside the class order");
    InstanceConditions result;
    const auto& class_rows = train.labels.class_rows[target_class];
    auto order = class_rows.indices();
    if (order.empty()) {
        log_warning("class index " + std::to_string(target_class) + " has no predicted training instances");
        return result;
    }
    auto rng = make_rng(derive_seed(seed, "order", target_class));
    shuffle(order.begin(), order.end(), rng);

    RowSet uncovered = class_rows;
    std::vector<Condition> accumulated;
    const std::size_t chunk = std::max<std::size_t>(1, static_cast<std::size_t>(exec.threads()) * 2);
    for (std::size_t start = 0; start < order.size() && !result.exhausted; start += chunk) {
        const auto stop = std::min(order.size(), start + chunk);
        const std::span<const std::size_t> batch(order.data() + start, stop - start);
        auto explained = explain_rows(explainer, batch, target_class, seed, exec);
        for (std::size_t i = 0; i < explained.size(); ++i) {
            for (const auto& c : explained[i]) {
                if (std::find(accumulated.begin(), accumulated.end(), c) != accumulated.end()) continue;
                accumulated.push_back(c);
                uncovered.subtract(train.index.condition_cover(c));
            }
            result.explained_rows.push_back(batch[i]);
            result.per_instance.push_back(std::move(explained[i]));
            if (uncovered.empty()) {
                result.exhausted = true;
                break;
            }
        }
    }
    std::sort(accumulated.begin(), accumulated.end());
    result.conditions = std::move(accumulated);
    return result;
}

}  // namespace magix
