#include "magix/model.hpp"

#include <cmath>

#include "magix/error.hpp"

namespace magix {

std::size_t argmax_class(std::span<const double> probabilities) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < probabilities.size(); ++c)
        if (probabilities[c] > probabilities[best]) best = c;
    return best;
}

void check_probabilities(const ProbabilityMatrix& p) {
    for (std::size_t i = 0; i < p.rows; ++i) {
        double sum = 0.0;
        for (double v : p.row(i)) {
            if (!(v >= 0.0 && v <= 1.0)) throw Error("model returned a probability outside [0,1] in row " + std::to_string(i));
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-6)
            throw Error("model probabilities for row " + std::to_string(i) + " sum to " + std::to_string(sum));
    }
}

ProbabilityMatrix predict_proba(const Classifier& model, const FeatureMatrix& instances, const ExecPolicy& exec) {
    if (instances.cols != model.feature_count() && instances.rows > 0)
        throw ConfigError("instances have " + std::to_string(instances.cols) + " features, model expects " +
                          std::to_string(model.feature_count()));
    auto p = model.predict_proba(instances, exec);
#ifndef NDEBUG
    check_probabilities(p);
#endif
    return p;
}

std::vector<std::size_t> predict_class(const Classifier& model, const FeatureMatrix& instances, const ExecPolicy& exec) {
    const auto p = predict_proba(model, instances, exec);
    std::vector<std::size_t> out(p.rows);
    for (std::size_t i = 0; i < p.rows; ++i) out[i] = argmax_class(p.row(i));
    return out;
}

std::vector<std::string> predict_labels(const Classifier& model, const FeatureMatrix& instances, const ExecPolicy& exec) {
    const auto idx = predict_class(model, instances, exec);
    std::vector<std::string> out;
    out.reserve(idx.size());
    for (auto c : idx) out.push_back(model.class_order()[c]);
    return out;
}

}  // namespace magix
