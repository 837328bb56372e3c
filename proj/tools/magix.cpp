// magix command line: explain, evaluate, train-model, render.
// Exit codes: 0 success, 1 stage error, 2 configuration error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "magix/error.hpp"
#include "magix/forest.hpp"
#include "magix/log.hpp"
#include "magix/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitStage = 1;
constexpr int kExitConfig = 2;

bool is_path_key(std::string key) {
    while (!key.empty() && key.front() == '-') key.erase(0, 1);
    for (auto& ch : key)
        if (ch == '-') ch = '_';
    return key == "dataset" || key == "schema" || key == "model.path" || key == "output_dir" || key == "progress";
}

// Paths given on the command line are relative to the working directory.
void override_one(json& doc, const std::string& key, const std::string& value) {
    if (is_path_key(key)) magix::apply_override(doc, key, json(fs::absolute(value).generic_string()).dump());
    else magix::apply_override(doc, key, value);
}

// "--ga.population-size 300" and "--ga.population-size=300" pairs left over
// after CLI11 parsing.
void apply_overrides(json& doc, const std::vector<std::string>& extras) {
    for (std::size_t i = 0; i < extras.size(); ++i) {
        const auto& arg = extras[i];
        if (arg.rfind("--", 0) != 0) throw magix::ConfigError("unexpected argument '" + arg + "'");
        const auto eq = arg.find('=');
        if (eq != std::string::npos) {
            override_one(doc, arg.substr(0, eq), arg.substr(eq + 1));
        } else {
            if (i + 1 >= extras.size()) throw magix::ConfigError("option " + arg + " needs a value");
            override_one(doc, arg, extras[++i]);
        }
    }
}

struct Common {
    bool quiet = false;
    bool verbose = false;
    std::optional<int> workers;
    bool serial = false;

    void add(CLI::App& app) {
        app.add_flag("-q,--quiet", quiet, "Only report errors");
        app.add_flag("-v,--verbose", verbose, "Log stage progress");
        app.add_option("--workers", workers, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
        app.add_flag("--serial", serial, "Use the serial reference kernels");
    }
    void apply_logging() const {
        magix::set_log_level(quiet ? magix::LogLevel::Quiet
                                   : verbose ? magix::LogLevel::Info : magix::LogLevel::Warning);
    }
    void apply(json& doc) const {
        if (workers) doc["workers"] = *workers;
        if (serial) doc["serial"] = true;
    }
};

json config_document(const std::optional<fs::path>& path, fs::path& base) {
    if (!path) return json::object();
    base = path->parent_path();
    return magix::read_json_file(*path);
}

int run_explain(const std::optional<fs::path>& config_path, const std::vector<std::string>& extras,
                const Common& common, const std::optional<fs::path>& out_dir, bool resume,
                const std::optional<fs::path>& progress) {
    fs::path base;
    auto doc = config_document(config_path, base);
    apply_overrides(doc, extras);
    common.apply(doc);
    if (out_dir) doc["output_dir"] = fs::absolute(*out_dir).generic_string();
    if (resume) doc["resume"] = true;
    if (progress) doc["progress"] = fs::absolute(*progress).generic_string();
    const auto cfg = magix::RunConfig::from_json(doc, base);

    const auto result = magix::explain(cfg);
    for (const auto& t : result.timings) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-28s %9.3f s", t.stage.c_str(), t.seconds);
        magix::log_info(buf);
    }
    if (!common.quiet) {
        std::cout << magix::render_text(result.report);
        std::cout << "\nreport written to " << (cfg.output_dir / "report.json").string() << "\n";
    }
    return 0;
}

int run_evaluate(const fs::path& report_path, const std::string& ks, const std::optional<fs::path>& data,
                 const std::optional<std::uint64_t>& split_seed, const std::optional<fs::path>& model_path,
                 const std::string& format, const Common& common) {
    const auto report = magix::read_json_file(report_path);
    magix::EvaluateOptions opts;
    opts.ks = magix::parse_ks(ks);
    opts.dataset = data;
    opts.split_seed = split_seed;
    opts.workers = common.workers.value_or(0);
    if (model_path) {
        magix::ModelSource src;
        src.kind = magix::ModelSourceKind::Load;
        src.path = fs::absolute(*model_path);
        opts.model = src;
    }
    const auto curve = magix::evaluate(report, report_path.parent_path(), opts);
    if (format == "json") {
        std::cout << curve.to_json().dump(2) << "\n";
    } else {
        const auto path = report.at("metadata").at("dataset").value("path", std::string("dataset"));
        std::cout << curve.to_text(fs::path(path).stem().string());
    }
    return 0;
}

int run_train(const std::optional<fs::path>& config_path, const std::vector<std::string>& extras,
              const Common& common, const fs::path& out) {
    fs::path base;
    auto doc = config_document(config_path, base);
    apply_overrides(doc, extras);
    common.apply(doc);
    auto cfg = magix::RunConfig::from_json(doc, base);
    cfg.model.kind = magix::ModelSourceKind::TrainBuiltin;

    magix::Dataset data;
    try {
        data = magix::load_dataset(cfg);
    } catch (const magix::ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw magix::StageError("load", e.what());
    }
    const auto parts = magix::split(data, cfg.split);
    std::shared_ptr<const magix::Classifier> model;
    try {
        model = magix::obtain_model(cfg, parts.train, cfg.exec());
    } catch (const magix::ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw magix::StageError("model", e.what());
    }
    const auto& forest = dynamic_cast<const magix::RandomForest&>(*model);
    forest.save(out);
    if (!common.quiet) {
        const auto predicted = magix::predict_labels(forest, parts.test.matrix(), cfg.exec());
        std::size_t hits = 0;
        for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == parts.test.labels()[i];
        std::printf("trained %zu trees on %zu rows; held-out accuracy %.2f%% on %zu rows\nmodel written to %s\n",
                    forest.trees().size(), parts.train.rows(),
                    predicted.empty() ? 0.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(predicted.size()),
                    predicted.size(), out.string().c_str());
    }
    return 0;
}

int run_render(const fs::path& report_path, const std::string& format) {
    const auto report = magix::read_json_file(report_path);
    if (!report.contains("schema_version")) throw magix::ConfigError(report_path.string() + " is not a report");
    if (format == "json") std::cout << report.dump(2) << "\n";
    else std::cout << magix::render_text(report);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Global rule explanations for black-box classifiers"};
    app.require_subcommand(1);

    Common common;

    auto* explain = app.add_subcommand("explain", "Learn per-class rules and score them with Imitation@K");
    std::optional<fs::path> explain_config, explain_out, explain_progress;
    bool resume = false;
    explain->add_option("-c,--config", explain_config, "Run configuration (JSON)")->check(CLI::ExistingFile);
    explain->add_option("-o,--output-dir", explain_out, "Directory for report.json and checkpoints");
    explain->add_option("--progress", explain_progress, "Write per-generation GA progress as JSON lines");
    explain->add_flag("--resume", resume, "Reuse matching checkpoints from an earlier run");
    explain->allow_extras();
    explain->footer("Any configuration field can be overridden, e.g. --ga.population-size 300 --seed 7");
    common.add(*explain);

    auto* evaluate = app.add_subcommand("evaluate", "Recompute Imitation@K for a saved report");
    fs::path eval_report = "out/report.json";
    std::string ks = "1,2,5,10,20", eval_format = "text";
    std::optional<fs::path> eval_data, eval_model;
    std::optional<std::uint64_t> split_seed;
    evaluate->add_option("-r,--report", eval_report, "Report produced by explain")->check(CLI::ExistingFile);
    evaluate->add_option("--ks", ks, "Comma-separated K values");
    evaluate->add_option("--data", eval_data, "Dataset (must match the report's fingerprint)");
    evaluate->add_option("--split-seed", split_seed, "Score against a different test split");
    evaluate->add_option("--model", eval_model, "Saved forest to use instead of the report's model source");
    evaluate->add_option("--format", eval_format, "text or json")->check(CLI::IsMember({"text", "json"}));
    common.add(*evaluate);

    auto* train = app.add_subcommand("train-model", "Train and save the builtin forest on the configured train split");
    std::optional<fs::path> train_config;
    fs::path train_out = "model.json";
    train->add_option("-c,--config", train_config, "Run configuration (JSON)")->check(CLI::ExistingFile);
    train->add_option("-o,--out", train_out, "Where to write the model");
    train->allow_extras();
    common.add(*train);

    auto* render = app.add_subcommand("render", "Print a saved report");
    fs::path render_report = "out/report.json";
    std::string render_format = "text";
    render->add_option("-r,--report", render_report, "Report produced by explain")->check(CLI::ExistingFile);
    render->add_option("--format", render_format, "text or json")->check(CLI::IsMember({"text", "json"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }
    common.apply_logging();

    try {
        if (*explain) return run_explain(explain_config, explain->remaining(), common, explain_out, resume, explain_progress);
        if (*evaluate) return run_evaluate(eval_report, ks, eval_data, split_seed, eval_model, eval_format, common);
        if (*train) return run_train(train_config, train->remaining(), common, train_out);
        if (*render) return run_render(render_report, render_format);
    } catch (const magix::StageError& e) {
        std::cerr << "magix: stage '" << e.stage() << "' failed: " << e.what() << "\n";
        return kExitStage;
    } catch (const magix::ConfigError& e) {
        std::cerr << "magix: configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const magix::ParseError& e) {
        std::cerr << "magix: configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "magix: " << e.what() << "\n";
        return kExitStage;
    }
    return kExitStage;
}
