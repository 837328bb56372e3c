#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "magix/dataset.hpp"

namespace magix {

/// Interpretable representation of one feature column. Numeric columns are
/// cut into half-open intervals [c_{i-1}, c_i); categorical columns keep one
/// bin per category.
struct ColumnBins {
    std::string name;
    ColumnKind kind = ColumnKind::Numeric;
    std::vector<double> cuts;         // strictly increasing, numeric only
    double observed_min = 0.0;        // training range, numeric only
    double observed_max = 0.0;
    std::vector<std::string> labels;  // one per bin
    int precision = 2;                // decimals used when rendering bounds

    std::size_t bin_count() const noexcept { return labels.size(); }
    bool numeric() const noexcept { return kind == ColumnKind::Numeric; }

    /// Bin index for a numeric value; values outside the fitted range land in
    /// the first/last bin and set `clamped`.
    int numeric_bin(double value, bool* clamped = nullptr) const;
    /// Bin index for a category name, -1 when unseen at fit time.
    int category_bin(std::string_view category) const;

    /// Lower/upper interval bound of a numeric bin; +-inf at the ends.
    double lower_bound(std::size_t bin) const;
    double upper_bound(std::size_t bin) const;
};

/// Bin index of each row and column; -1 marks a missing (or unseen) value.
struct BinnedData {
    std::size_t rows = 0;
    std::vector<std::vector<int>> codes;  // [column][row]
    std::size_t clamped = 0;              // numeric values outside the fitted range
    std::size_t unseen = 0;               // categories unknown to the binning map

    int code(std::size_t row, std::size_t col) const { return codes[col][row]; }
    std::size_t columns() const noexcept { return codes.size(); }
};

class BinningMap {
public:
    BinningMap() = default;
    explicit BinningMap(std::vector<ColumnBins> columns);

    const std::vector<ColumnBins>& columns() const noexcept { return columns_; }
    const ColumnBins& column(std::size_t j) const { return columns_.at(j); }
    std::size_t size() const noexcept { return columns_.size(); }
    std::optional<std::size_t> index_of(std::string_view name) const;

    nlohmann::json to_json() const;
    static BinningMap from_json(const nlohmann::json& doc);

    friend bool operator==(const BinningMap& a, const BinningMap& b);

private:
    std::vector<ColumnBins> columns_;
};

/// Entropy-minimizing cut points for one column (Fayyad-Irani recursive
/// partitioning with the MDL stopping rule), refined best-gain-first until
/// `max_bins` intervals exist. Missing values must be filtered out already.
/// Returns an empty vector when MDL accepts no split.
std::vector<double> mdlp_cut_points(std::span<const double> values, std::span<const int> classes,
                                    std::size_t max_bins);

/// Quartile cut points, deduplicated and restricted to the open value range.
std::vector<double> quartile_cut_points(std::span<const double> values, std::size_t max_bins);

/// Fits bins for every column against `labels` (model predictions in the
/// pipeline). Numeric columns fall back to quartiles when MDL accepts no
/// split; constant columns get a single bin.
BinningMap fit_entropy_bins(const Dataset& data, const std::vector<std::string>& labels,
                            std::size_t max_bins = 8);

/// Replaces every value by its bin index. Uses raw values; the dataset keeps
/// them for model calls.
BinnedData apply_bins(const Dataset& data, const BinningMap& bins);

/// Formats a bound the way bin labels and rule renderings show it.
std::string format_bound(double value, int precision = 2);

}  // namespace magix
