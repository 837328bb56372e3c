#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "magix/dataset.hpp"
#include "magix/parallel.hpp"

namespace magix {

/// One probability vector per row, aligned with the model's class order.
struct ProbabilityMatrix {
    std::size_t rows = 0;
    std::size_t classes = 0;
    std::vector<double> values;

    ProbabilityMatrix() = default;
    ProbabilityMatrix(std::size_t r, std::size_t k) : rows(r), classes(k), values(r * k, 0.0) {}

    std::span<const double> row(std::size_t i) const { return {values.data() + i * classes, classes}; }
    std::span<double> row(std::size_t i) { return {values.data() + i * classes, classes}; }
};

/// The black-box contract: anything that answers predict-proba over raw
/// (un-binned) instances. Implementations must be safe to call concurrently.
class Classifier {
public:
    virtual ~Classifier() = default;

    virtual const std::vector<std::string>& class_order() const = 0;
    virtual std::size_t feature_count() const = 0;
    /// "builtin-forest" or "external-bridge".
    virtual std::string kind() const = 0;

    virtual ProbabilityMatrix predict_proba(const FeatureMatrix& instances,
                                            const ExecPolicy& exec = ExecPolicy::serial()) const = 0;
};

using ModelHandle = std::shared_ptr<const Classifier>;

/// Index of the largest entry; exact ties go to the lowest index.
std::size_t argmax_class(std::span<const double> probabilities);

/// Throws when a row is not a probability vector (entries in [0,1], sum 1 within 1e-6).
void check_probabilities(const ProbabilityMatrix& p);

/// predict_proba with the normalization check applied in debug builds.
ProbabilityMatrix predict_proba(const Classifier& model, const FeatureMatrix& instances,
                                const ExecPolicy& exec = ExecPolicy::serial());

/// Argmax class index per row.
std::vector<std::size_t> predict_class(const Classifier& model, const FeatureMatrix& instances,
                                       const ExecPolicy& exec = ExecPolicy::serial());

/// Argmax class name per row.
std::vector<std::string> predict_labels(const Classifier& model, const FeatureMatrix& instances,
                                        const ExecPolicy& exec = ExecPolicy::serial());

}  // namespace magix
