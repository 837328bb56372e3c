#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace magix {

enum class ColumnKind { Numeric, Categorical };

std::string_view to_string(ColumnKind kind) noexcept;
ColumnKind column_kind_from_string(std::string_view text);

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::Numeric;

    friend bool operator==(const ColumnSpec&, const ColumnSpec&) = default;
};

/// Feature columns in file order plus the optional label column name.
struct Schema {
    std::vector<ColumnSpec> columns;
    std::optional<std::string> class_column;

    /// Throws ConfigError on duplicate/empty names or when no feature column
    /// remains besides the class column.
    void validate() const;
    std::optional<std::size_t> index_of(std::string_view name) const;

    nlohmann::json to_json() const;
    static Schema from_json(const nlohmann::json& doc);
    static Schema load(const std::filesystem::path& path);

    friend bool operator==(const Schema&, const Schema&) = default;
};

/// Row-major block of raw feature values, the input format of every model.
/// Categorical values are stored as their category index; NaN marks a
/// missing value.
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    FeatureMatrix() = default;
    FeatureMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

    std::span<const double> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
    std::span<double> row(std::size_t i) { return {values.data() + i * cols, cols}; }
    double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

inline bool is_missing(double v) noexcept { return std::isnan(v); }

struct Column {
    ColumnSpec spec;
    std::vector<double> values;            // raw value or category index, NaN = missing
    std::vector<std::string> categories;   // categorical columns only

    const std::string& name() const noexcept { return spec.name; }
    bool numeric() const noexcept { return spec.kind == ColumnKind::Numeric; }
};

/// Tabular data: feature columns (class column removed) and optional labels.
class Dataset {
public:
    Dataset() = default;
    Dataset(std::vector<Column> columns, std::optional<std::vector<std::string>> labels,
            std::optional<std::string> class_column = std::nullopt);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t feature_count() const noexcept { return columns_.size(); }
    const std::vector<Column>& columns() const noexcept { return columns_; }
    const Column& column(std::size_t j) const { return columns_.at(j); }
    std::optional<std::size_t> column_index(std::string_view name) const;

    bool has_labels() const noexcept { return labels_.has_value(); }
    const std::vector<std::string>& labels() const;
    /// Distinct labels in first-appearance order.
    std::vector<std::string> label_values() const;

    Schema schema() const;
    double value(std::size_t row, std::size_t col) const { return columns_[col].values[row]; }
    std::vector<double> instance(std::size_t row) const;
    FeatureMatrix matrix() const;

    /// Rows in the given order; categories and schema are preserved.
    Dataset subset(std::span<const std::size_t> rows) const;

    /// Hex digest identifying the loaded content; empty when built in memory.
    const std::string& fingerprint() const noexcept { return fingerprint_; }
    void set_fingerprint(std::string fp) { fingerprint_ = std::move(fp); }

    /// Renders a raw value for display (category name or number).
    std::string format_value(std::size_t col, double v) const;

private:
    std::vector<Column> columns_;
    std::optional<std::vector<std::string>> labels_;
    std::optional<std::string> class_column_;
    std::size_t rows_ = 0;
    std::string fingerprint_;
};

struct CsvOptions {
    std::optional<Schema> schema_hint;
    /// Label column; defaults to the hint's class column, else the last column.
    std::optional<std::string> class_column;
    bool has_class_column = true;
};

/// Splits CSV text into records (header included). Quoted fields follow
/// RFC-4180: embedded separators, newlines and doubled quotes.
std::vector<std::vector<std::string>> parse_csv_records(std::string_view text);

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options = {});
Dataset parse_csv(std::string_view text, const CsvOptions& options = {});

std::string content_fingerprint(std::string_view text);

struct SplitSpec {
    double train_fraction = 0.7;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    std::vector<std::string> warnings;
};

/// Seeded split of n rows, stratified by `strata` when given. Classes with a
/// single member go to train entirely.
SplitIndices split_indices(std::size_t n, const std::vector<std::string>* strata,
                           const SplitSpec& spec);

struct SplitResult {
    Dataset train;
    Dataset test;
    SplitIndices indices;
};

/// Stratifies by `predicted` when supplied, else by the dataset labels, else
/// plain shuffling.
SplitResult split(const Dataset& data, const SplitSpec& spec,
                  const std::vector<std::string>* predicted = nullptr);

}  // namespace magix
