#include "magix/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "magix/bridge.hpp"
#include "magix/error.hpp"
#include "magix/log.hpp"
#include "magix/random.hpp"

namespace magix {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------- files

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_json_file(const fs::path& path, const json& doc) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const auto tmp = fs::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw Error("cannot write " + path.string());
        out << doc.dump(2) << '\n';
        if (!out) throw Error("cannot write " + path.string());
    }
    fs::rename(tmp, path);
}

// ---------------------------------------------------------------- config

namespace {

const char* source_name(ModelSourceKind k) {
    switch (k) {
        case ModelSourceKind::TrainBuiltin: return "train";
        case ModelSourceKind::Load: return "load";
        case ModelSourceKind::Bridge: return "bridge";
    }
    return "train";
}

ModelSourceKind source_from(const std::string& s) {
    if (s == "train") return ModelSourceKind::TrainBuiltin;
    if (s == "load") return ModelSourceKind::Load;
    if (s == "bridge") return ModelSourceKind::Bridge;
    throw ConfigError("model.source must be train, load or bridge, not '" + s + "'");
}

json model_source_json(const ModelSource& m) {
    return json{{"source", source_name(m.kind)},
                {"forest", m.forest.to_json()},
                {"path", m.path.empty() ? json(nullptr) : json(m.path.generic_string())},
                {"command", m.command},
                {"timeout_seconds", m.timeout_seconds}};
}

// Full skeleton of a run document: every overridable key present.
json default_document() {
    RunConfig c;
    json doc = c.to_json();
    doc["split"]["seed"] = nullptr;
    doc["model"]["forest"]["seed"] = nullptr;
    doc["ga"]["profile"] = nullptr;
    doc["output_dir"] = c.output_dir.generic_string();
    doc["workers"] = c.workers;
    doc["serial"] = c.serial;
    doc["resume"] = c.resume;
    doc["progress"] = nullptr;
    return doc;
}

void strip_nulls(json& doc) {
    if (!doc.is_object()) return;
    for (auto it = doc.begin(); it != doc.end();) {
        if (it->is_null()) {
            it = doc.erase(it);
        } else {
            strip_nulls(*it);
            ++it;
        }
    }
}

fs::path resolve(const fs::path& base, const std::string& p) {
    if (p.empty()) return {};
    const fs::path path(p);
    return fs::absolute(path.is_absolute() || base.empty() ? path : base / path).lexically_normal();
}

std::string normalize_key(std::string_view key) {
    while (!key.empty() && key.front() == '-') key.remove_prefix(1);
    std::string out(key);
    for (auto& ch : out)
        if (ch == '-') ch = '_';
    return out;
}

void flatten_into(const json& doc, const std::string& prefix, std::map<std::string, json>& out) {
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        const auto key = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (it->is_object()) flatten_into(*it, key, out);
        else out[key] = *it;
    }
}

}  // namespace

void RunConfig::validate() const {
    if (dataset.empty()) throw ConfigError("dataset path is required");
    split.validate();
    lime.validate();
    ga.validate();
    refine.validate();
    if (ks.empty()) throw ConfigError("ks must not be empty");
    for (std::size_t i = 0; i < ks.size(); ++i)
        if (ks[i] == 0 || (i > 0 && ks[i] <= ks[i - 1])) throw ConfigError("ks must be positive and strictly increasing");
    if (max_bins < 2) throw ConfigError("max_bins must be at least 2");
    if (workers < 0) throw ConfigError("workers must be non-negative");
    switch (model.kind) {
        case ModelSourceKind::TrainBuiltin: model.forest.validate(); break;
        case ModelSourceKind::Load:
            if (model.path.empty()) throw ConfigError("model.path is required when model.source is load");
            break;
        case ModelSourceKind::Bridge:
            if (model.command.empty()) throw ConfigError("model.command is required when model.source is bridge");
            if (!(model.timeout_seconds > 0.0)) throw ConfigError("model.timeout_seconds must be positive");
            break;
    }
}

json RunConfig::to_json() const {
    return json{{"dataset", dataset.generic_string()},
                {"schema", schema ? json(schema->generic_string()) : json(nullptr)},
                {"class_column", class_column ? json(*class_column) : json(nullptr)},
                {"seed", seed},
                {"max_bins", max_bins},
                {"ks", ks},
                {"model", model_source_json(model)},
                {"split", {{"train_fraction", split.train_fraction}, {"seed", split.seed}}},
                {"lime", lime.to_json()},
                {"ga", ga.to_json()},
                {"refine", refine.to_json()}};
}

RunConfig RunConfig::from_json(const json& input, const fs::path& base_dir) {
    if (!input.is_object()) throw ConfigError("run configuration must be a JSON object");
    json doc = default_document();
    const auto known = flatten_config(doc);
    for (const auto& [key, value] : flatten_config(input))
        if (!known.contains(key)) throw ConfigError("unknown configuration key '" + key + "'");
    doc.merge_patch(input);
    // merge_patch drops keys set to null; keep the skeleton for known optionals.
    strip_nulls(doc);

    try {
        RunConfig c;
        c.seed = doc.value("seed", c.seed);
        c.dataset = resolve(base_dir, doc.value("dataset", std::string{}));
        if (doc.contains("schema")) c.schema = resolve(base_dir, doc["schema"].get<std::string>());
        if (doc.contains("class_column")) c.class_column = doc["class_column"].get<std::string>();
        c.max_bins = doc.value("max_bins", c.max_bins);
        c.ks = doc.value("ks", c.ks);

        const auto& m = doc.at("model");
        c.model.kind = source_from(m.value("source", std::string("train")));
        c.model.forest = ForestConfig::from_json(m.value("forest", json::object()));
        if (!m.contains("forest") || !m["forest"].contains("seed")) c.model.forest.seed = derive_seed(c.seed, "forest");
        if (m.contains("path")) c.model.path = resolve(base_dir, m["path"].get<std::string>());
        c.model.command = m.value("command", std::vector<std::string>{});
        if (!c.model.command.empty() && c.model.command.front().find('/') != std::string::npos)
            c.model.command.front() = resolve(base_dir, c.model.command.front()).string();
        c.model.timeout_seconds = m.value("timeout_seconds", c.model.timeout_seconds);

        const auto& s = doc.at("split");
        c.split.train_fraction = s.value("train_fraction", c.split.train_fraction);
        c.split.seed = s.contains("seed") ? s["seed"].get<std::uint64_t>() : derive_seed(c.seed, "split");

        c.lime = LimeConfig::from_json(doc.at("lime"));
        // The profile supplies defaults for the keys the user left out, so
        // only the user's own ga keys are read on top of it.
        json ga = input.contains("ga") ? input["ga"] : json::object();
        strip_nulls(ga);
        c.ga = GaConfig::from_json(ga);
        c.refine = RefineConfig::from_json(doc.at("refine"));

        c.output_dir = resolve(base_dir, doc.value("output_dir", std::string("out")));
        c.workers = doc.value("workers", c.workers);
        c.serial = doc.value("serial", c.serial);
        c.resume = doc.value("resume", c.resume);
        if (doc.contains("progress")) c.progress = resolve(base_dir, doc["progress"].get<std::string>());
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("run configuration: ") + e.what());
    }
}

RunConfig RunConfig::load(const fs::path& path) {
    return from_json(read_json_file(path), path.parent_path());
}

std::map<std::string, json> flatten_config(const json& doc) {
    std::map<std::string, json> out;
    if (doc.is_object()) flatten_into(doc, "", out);
    return out;
}

void apply_override(json& doc, std::string_view raw_key, std::string_view value) {
    const auto key = normalize_key(raw_key);
    if (!flatten_config(default_document()).contains(key)) throw ConfigError("unknown option --" + key);
    json parsed;
    try {
        parsed = json::parse(value);
    } catch (const json::exception&) {
        parsed = std::string(value);
    }
    if (key == "ks" && parsed.is_string()) parsed = parse_ks(parsed.get<std::string>());
    if (key == "ks" && parsed.is_number()) parsed = json::array({parsed});
    if (key == "model.command" && parsed.is_string()) {
        std::vector<std::string> parts;
        std::istringstream words(parsed.get<std::string>());
        for (std::string w; words >> w;) parts.push_back(w);
        parsed = parts;
    }
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const auto part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (dot == std::string::npos) {
            (*node)[part] = parsed;
            return;
        }
        node = &(*node)[part];
        start = dot + 1;
    }
}

// ---------------------------------------------------------------- model / data

Dataset load_dataset(const RunConfig& cfg) {
    CsvOptions opts;
    if (cfg.schema) opts.schema_hint = Schema::load(*cfg.schema);
    opts.class_column = cfg.class_column;
    return load_csv(cfg.dataset, opts);
}

ModelHandle obtain_model(const RunConfig& cfg, const Dataset& train, const ExecPolicy& exec) {
    switch (cfg.model.kind) {
        case ModelSourceKind::TrainBuiltin:
            if (!train.has_labels()) throw ConfigError("training the builtin forest needs a labelled dataset");
            return std::make_shared<RandomForest>(RandomForest::train(train, cfg.model.forest, exec));
        case ModelSourceKind::Load:
            return std::make_shared<RandomForest>(RandomForest::load(cfg.model.path));
        case ModelSourceKind::Bridge: {
            BridgeOptions opts;
            opts.adapter = cfg.model.command.front();
            opts.arguments.assign(cfg.model.command.begin() + 1, cfg.model.command.end());
            opts.timeout = std::chrono::milliseconds(static_cast<long long>(cfg.model.timeout_seconds * 1000.0));
            return std::make_shared<BridgeClassifier>(std::move(opts));
        }
    }
    throw ConfigError("unknown model source");
}

// ---------------------------------------------------------------- explain

namespace {

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

template <typename F>
auto run_stage(const std::string& stage, std::vector<StageTiming>& timings, F&& body) {
    Stopwatch watch;
    try {
        if constexpr (std::is_void_v<decltype(body())>) {
            body();
            timings.push_back({stage, watch.seconds()});
        } else {
            auto out = body();
            timings.push_back({stage, watch.seconds()});
            return out;
        }
    } catch (const StageError&) {
        throw;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

ModelLabels labels_for(const std::vector<std::size_t>& predicted, std::span<const std::size_t> rows, std::size_t k) {
    std::vector<std::size_t> sub;
    sub.reserve(rows.size());
    for (auto r : rows) sub.push_back(predicted[r]);
    return ModelLabels(std::move(sub), k);
}

std::vector<std::string> names_of(const std::vector<std::size_t>& idx, const std::vector<std::string>& order) {
    std::vector<std::string> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(order[i]);
    return out;
}

std::string checkpoint_key(const RunConfig& cfg, const std::string& fingerprint, const std::string& stage) {
    json k = cfg.to_json();
    if (stage == "conditions") {
        k.erase("ga");
        k.erase("refine");
        k.erase("ks");
    } else {
        k.erase("refine");
        k.erase("ks");
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a(k.dump() + "|" + fingerprint + "|" + stage)));
    return buf;
}

fs::path checkpoint_path(const RunConfig& cfg, std::size_t cls, const std::string& stage) {
    return cfg.output_dir / "checkpoints" / ("class-" + std::to_string(cls) + "-" + stage + ".json");
}

std::optional<json> read_checkpoint(const RunConfig& cfg, std::size_t cls, const std::string& stage,
                                    const std::string& key) {
    if (!cfg.resume) return std::nullopt;
    const auto path = checkpoint_path(cfg, cls, stage);
    if (!fs::exists(path)) return std::nullopt;
    auto doc = read_json_file(path);
    if (doc.value("key", std::string{}) != key) {
        log_warning("ignoring stale checkpoint " + path.string());
        return std::nullopt;
    }
    log_info("resuming from " + path.string());
    return doc;
}

json rules_json(const RuleSet& rules, const RuleRenderer& renderer) {
    json arr = json::array();
    for (const auto& r : rules) arr.push_back(renderer.rule_json(r));
    return arr;
}

}  // namespace

namespace {

void require_inputs(const RunConfig& cfg) {
    if (!fs::is_regular_file(cfg.dataset)) throw ConfigError("dataset not found: " + cfg.dataset.string());
    if (cfg.schema && !fs::is_regular_file(*cfg.schema)) throw ConfigError("schema not found: " + cfg.schema->string());
    if (cfg.model.kind == ModelSourceKind::Load && !fs::is_regular_file(cfg.model.path))
        throw ConfigError("model not found: " + cfg.model.path.string());
}

}  // namespace

ExplainResult explain(const RunConfig& cfg) {
    cfg.validate();
    require_inputs(cfg);
    const auto exec = cfg.exec();
    ExplainResult result;
    auto& timings = result.timings;

    const auto data = run_stage("load", timings, [&] { return load_dataset(cfg); });
    const auto parts = run_stage("split", timings, [&] { return split(data, cfg.split); });
    for (const auto& w : parts.indices.warnings) log_info(w);
    if (parts.test.rows() == 0) throw StageError("split", "test split is empty");

    const auto model = run_stage("model", timings, [&] {
        auto m = obtain_model(cfg, parts.train, exec);
        if (m->feature_count() != data.feature_count())
            throw ConfigError("model expects " + std::to_string(m->feature_count()) + " features, dataset has " +
                              std::to_string(data.feature_count()));
        return m;
    });
    const auto& class_order = model->class_order();
    result.class_order = class_order;
    const std::size_t k = class_order.size();

    const auto predicted = run_stage("predict", timings, [&] { return predict_class(*model, data.matrix(), exec); });
    if (data.has_labels()) {
        std::size_t hits = 0;
        for (auto r : parts.indices.test) hits += class_order[predicted[r]] == data.labels()[r];
        result.model_test_accuracy = static_cast<double>(hits) / static_cast<double>(parts.indices.test.size());
    }

    auto train_labels = labels_for(predicted, parts.indices.train, k);
    auto test_labels = labels_for(predicted, parts.indices.test, k);
    result.bins = run_stage("binning", timings, [&] {
        return fit_entropy_bins(parts.train, names_of(train_labels.predicted, class_order), cfg.max_bins);
    });
    const EvaluationSet train(apply_bins(parts.train, result.bins), std::move(train_labels));
    const EvaluationSet test(apply_bins(parts.test, result.bins), std::move(test_labels));
    if (test.data.clamped + test.data.unseen > 0)
        log_info("test split: " + std::to_string(test.data.clamped) + " values clamped, " +
                 std::to_string(test.data.unseen) + " unseen categories");
    const RuleRenderer renderer(result.bins, class_order);
    const LimeExplainer explainer(*model, parts.train, train.data, cfg.lime);

    std::unique_ptr<std::ofstream> progress;
    if (cfg.progress) {
        if (cfg.progress->has_parent_path()) fs::create_directories(cfg.progress->parent_path());
        progress = std::make_unique<std::ofstream>(*cfg.progress);
    }
    fs::create_directories(cfg.output_dir / "checkpoints");

    json classes = json::array();
    result.rules.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        const auto& name = class_order[c];

        // Instance-level conditions.
        const auto cond_key = checkpoint_key(cfg, data.fingerprint(), "conditions");
        std::vector<Condition> conditions;
        std::size_t explained = 0;
        if (auto ck = read_checkpoint(cfg, c, "conditions", cond_key)) {
            for (const auto& j : ck->at("conditions")) conditions.push_back(renderer.condition_from_json(j));
            explained = ck->value("explained_instances", std::size_t{0});
        } else {
            const auto inst = run_stage("conditions[" + name + "]", timings, [&] {
                return gen_inst_conds(explainer, train, c, derive_seed(cfg.seed, "conditions", c), exec);
            });
            conditions = inst.conditions;
            explained = inst.explained_rows.size();
            json arr = json::array();
            for (const auto& cond : conditions) arr.push_back(renderer.condition_json(cond));
            write_json_file(checkpoint_path(cfg, c, "conditions"),
                            {{"key", cond_key}, {"class", name}, {"explained_instances", explained}, {"conditions", arr}});
        }

        // Rule evolution.
        const auto ga_key = checkpoint_key(cfg, data.fingerprint(), "ga");
        RuleSet evolved;
        if (auto ck = read_checkpoint(cfg, c, "ga", ga_key)) {
            for (const auto& j : ck->at("rules")) evolved.push_back(score(renderer.rule_from_json(j).rule, train));
        } else {
            evolved = run_stage("ga[" + name + "]", timings, [&] {
                return evolve_class(conditions, c, train, cfg.ga, derive_seed(cfg.seed, "ga", c), exec, progress.get())
                    .rules;
            });
            write_json_file(checkpoint_path(cfg, c, "ga"),
                            {{"key", ga_key}, {"class", name}, {"rules", rules_json(evolved, renderer)}});
        }

        // Refinement.
        RuleSet after_dominance, after_baseline;
        result.rules[c] = run_stage("refine[" + name + "]", timings, [&] {
            after_dominance = drop_dominated(evolved, train);
            after_baseline = baseline_filter(after_dominance, test, cfg.refine.require_above_baseline);
            return sort_and_dedup(after_baseline, train, cfg.refine);
        });

        classes.push_back({{"class", name},
                           {"train_predicted", train.labels.class_size(c)},
                           {"test_predicted", test.labels.class_size(c)},
                           {"test_baseline", baseline_precision(test, c)},
                           {"explained_instances", explained},
                           {"conditions", conditions.size()},
                           {"ga_rules", evolved.size()},
                           {"after_dominance", after_dominance.size()},
                           {"after_baseline", after_baseline.size()},
                           {"rules", rules_json(result.rules[c], renderer)}});
    }

    result.curve = run_stage("imitation", timings, [&] {
        return imitation_at_k(result.rules, test, cfg.ks, derive_seed(cfg.seed, "fidelity"), exec);
    });

    json model_meta{{"kind", model->kind()},
                    {"class_order", class_order},
                    {"test_accuracy", result.model_test_accuracy ? json(*result.model_test_accuracy) : json(nullptr)}};
    json seeds{{"global", cfg.seed},
               {"split", cfg.split.seed},
               {"forest", cfg.model.forest.seed},
               {"fidelity", derive_seed(cfg.seed, "fidelity")}};
    json per_class = json::array();
    for (std::size_t c = 0; c < k; ++c)
        per_class.push_back({{"class", class_order[c]},
                             {"conditions", derive_seed(cfg.seed, "conditions", c)},
                             {"ga", derive_seed(cfg.seed, "ga", c)}});
    seeds["classes"] = per_class;

    result.report = json{
        {"schema_version", kReportSchemaVersion},
        {"metadata",
         {{"config", cfg.to_json()},
          {"seeds", seeds},
          {"dataset",
           {{"path", cfg.dataset.generic_string()},
            {"fingerprint", data.fingerprint()},
            {"rows", data.rows()},
            {"features", data.feature_count()},
            {"train_rows", parts.train.rows()},
            {"test_rows", parts.test.rows()},
            {"test_values_clamped", test.data.clamped},
            {"test_categories_unseen", test.data.unseen}}},
          {"model", model_meta}}},
        {"binning", result.bins.to_json()},
        {"classes", classes},
        {"imitation", result.curve.to_json()}};

    write_json_file(cfg.output_dir / "report.json", result.report);
    return result;
}

// ---------------------------------------------------------------- evaluate / render

ImitationCurve evaluate(const json& report, const fs::path& report_dir, const EvaluateOptions& options) {
    if (report.value("schema_version", 0) != kReportSchemaVersion)
        throw ConfigError("unsupported report schema_version");
    if (options.ks.empty()) throw ConfigError("ks must not be empty");
    json cfg_doc = report.at("metadata").at("config");
    if (options.dataset) cfg_doc["dataset"] = fs::absolute(*options.dataset).generic_string();
    auto cfg = RunConfig::from_json(cfg_doc, report_dir);
    if (options.model) cfg.model = *options.model;
    if (options.split_seed) cfg.split.seed = *options.split_seed;
    cfg.workers = options.workers;
    require_inputs(cfg);
    const auto exec = cfg.exec();

    const auto data = load_dataset(cfg);
    const auto expected = report.at("metadata").at("dataset").at("fingerprint").get<std::string>();
    if (data.fingerprint() != expected)
        throw ConfigError("dataset fingerprint " + data.fingerprint() + " does not match the report's " + expected);

    const auto parts = split(data, cfg.split);
    if (parts.test.rows() == 0) throw StageError("split", "test split is empty");
    // A builtin forest is retrained from the report's original split so the
    // black box is the one the rules were learned from.
    ModelHandle model;
    if (cfg.model.kind == ModelSourceKind::TrainBuiltin && options.split_seed) {
        auto original = RunConfig::from_json(report.at("metadata").at("config"), report_dir);
        if (options.dataset) original.dataset = cfg.dataset;
        model = obtain_model(cfg, split(data, original.split).train, exec);
    } else {
        model = obtain_model(cfg, parts.train, exec);
    }
    const auto bins = BinningMap::from_json(report.at("binning"));
    const auto& order = model->class_order();
    const RuleRenderer renderer(bins, order);

    std::vector<RuleSet> per_class(order.size());
    for (const auto& cls : report.at("classes"))
        for (const auto& r : cls.at("rules")) {
            auto rule = renderer.rule_from_json(r);
            per_class[rule.rule.target_class].push_back(std::move(rule));
        }

    const auto predicted = predict_class(*model, parts.test.matrix(), exec);
    const EvaluationSet test(apply_bins(parts.test, bins), ModelLabels(predicted, order.size()));
    return imitation_at_k(per_class, test, options.ks, derive_seed(cfg.seed, "fidelity"), exec);
}

std::string render_text(const json& report) {
    std::ostringstream out;
    char buf[128];
    const auto& meta = report.value("metadata", json::object());
    if (meta.contains("dataset")) {
        const auto& d = meta["dataset"];
        out << "Dataset: " << d.value("path", std::string("?")) << " (" << d.value("rows", 0) << " rows, "
            << d.value("train_rows", 0) << " train / " << d.value("test_rows", 0) << " test)\n";
    }
    if (meta.contains("model")) {
        const auto& m = meta["model"];
        out << "Model: " << m.value("kind", std::string("?"));
        if (m.contains("test_accuracy") && !m["test_accuracy"].is_null()) {
            std::snprintf(buf, sizeof buf, ", test accuracy %.2f%%", 100.0 * m["test_accuracy"].get<double>());
            out << buf;
        }
        out << "\n";
    }
    for (const auto& cls : report.value("classes", json::array())) {
        const auto& rules = cls.at("rules");
        out << "\nClass " << cls.at("class").get<std::string>() << " (" << rules.size() << " rules)\n";
        std::size_t i = 0;
        for (const auto& r : rules) {
            std::snprintf(buf, sizeof buf, " (precision %.2f%%, coverage %.2f%%)", 100.0 * r.at("precision").get<double>(),
                          100.0 * r.value("coverage", 0.0));
            out << "  " << ++i << ". " << r.at("text").get<std::string>() << buf << "\n";
        }
    }
    if (report.contains("imitation")) {
        std::string label = "dataset";
        if (meta.contains("dataset")) label = fs::path(meta["dataset"].value("path", label)).stem().string();
        out << "\nImitation@K\n" << ImitationCurve::from_json(report["imitation"]).to_text(label);
    }
    return out.str();
}

}  // namespace magix
