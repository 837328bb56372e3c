#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "magix/binning.hpp"
#include "magix/dataset.hpp"
#include "magix/evolve.hpp"
#include "magix/fidelity.hpp"
#include "magix/forest.hpp"
#include "magix/local_explain.hpp"
#include "magix/model.hpp"
#include "magix/refine.hpp"

namespace magix {

inline constexpr int kReportSchemaVersion = 1;

enum class ModelSourceKind { TrainBuiltin, Load, Bridge };

struct ModelSource {
    ModelSourceKind kind = ModelSourceKind::TrainBuiltin;
    ForestConfig forest;
    std::filesystem::path path;          // Load
    std::vector<std::string> command;    // Bridge: adapter and its arguments
    double timeout_seconds = 60.0;       // Bridge
};

struct RunConfig {
    std::filesystem::path dataset;
    std::optional<std::filesystem::path> schema;
    std::optional<std::string> class_column;
    ModelSource model;
    SplitSpec split;
    LimeConfig lime;
    GaConfig ga;
    RefineConfig refine;
    std::vector<std::size_t> ks{1, 2, 5, 10, 20};
    std::size_t max_bins = 8;
    std::uint64_t seed = 0;

    // Runtime settings; they never change the report.
    std::filesystem::path output_dir = "out";
    int workers = 0;
    bool serial = false;
    bool resume = false;
    std::optional<std::filesystem::path> progress;

    void validate() const;
    ExecPolicy exec() const { return serial ? ExecPolicy::serial() : ExecPolicy::parallel(workers); }

    /// Fields that determine the report; relative paths stay as written.
    nlohmann::json to_json() const;
    /// Relative paths in `doc` resolve against `base_dir`.
    static RunConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
    static RunConfig load(const std::filesystem::path& path);
};

/// Applies "--ga.population-size 300"-style overrides to a config document.
/// Keys use dots for nesting and dashes or underscores inside names; values
/// parse as JSON when possible and as strings otherwise. Unknown keys throw.
void apply_override(nlohmann::json& doc, std::string_view key, std::string_view value);

/// Every overridable key with its current value, flattened ("ga.generations").
std::map<std::string, nlohmann::json> flatten_config(const nlohmann::json& doc);

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct ExplainResult {
    nlohmann::json report;
    std::vector<std::string> class_order;
    BinningMap bins;
    std::vector<RuleSet> rules;  // per class, final order
    ImitationCurve curve;
    std::optional<double> model_test_accuracy;
    std::vector<StageTiming> timings;
};

/// Obtains the configured model. Builtin forests train on `train`.
ModelHandle obtain_model(const RunConfig& cfg, const Dataset& train, const ExecPolicy& exec);

Dataset load_dataset(const RunConfig& cfg);

/// Runs the whole pipeline and writes report.json plus checkpoints into the
/// output directory. Stage failures throw StageError naming the stage.
ExplainResult explain(const RunConfig& cfg);

struct EvaluateOptions {
    std::optional<std::filesystem::path> dataset;  // defaults to the report's
    std::optional<std::uint64_t> split_seed;       // defaults to the report's
    std::vector<std::size_t> ks{1, 2, 5, 10, 20};
    std::optional<ModelSource> model;
    int workers = 0;
};

/// Recomputes Imitation@K for a saved report. The dataset must match the
/// report's fingerprint.
ImitationCurve evaluate(const nlohmann::json& report, const std::filesystem::path& report_dir,
                        const EvaluateOptions& options);

/// Plain-text rendering of a report: rules per class, then the curve.
std::string render_text(const nlohmann::json& report);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace magix
