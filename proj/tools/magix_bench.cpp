// Serial reference vs OpenMP timings for the parallel kernels. Each kernel's
// parallel output is checked against its serial output before timing.
//
//   magix_bench [--quick] [--workers N]

#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>

#include "magix/binning.hpp"
#include "magix/evolve.hpp"
#include "magix/forest.hpp"
#include "magix/local_explain.hpp"
#include "magix/log.hpp"

using namespace magix;

namespace {

template <typename F>
double seconds(F&& f, int reps) {
    const auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / reps;
}

bool report(const char* kernel, double serial, double parallel, bool same) {
    std::printf("%-28s %10.4f s %10.4f s %7.2fx  %s\n", kernel, serial, parallel, serial / parallel,
                same ? "identical" : "MISMATCH");
    return same;
}

// Synthetic rows: numeric features with a class determined by two of them.
Dataset synthetic(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    auto rng = make_rng(seed);
    std::vector<Column> columns(cols);
    std::vector<std::string> labels(rows);
    for (std::size_t j = 0; j < cols; ++j) {
        columns[j].spec = {"x" + std::to_string(j), ColumnKind::Numeric};
        columns[j].values.resize(rows);
    }
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) columns[j].values[i] = uniform01(rng);
        const double s = columns[0].values[i] + 0.5 * columns[1].values[i] + 0.2 * uniform01(rng);
        labels[i] = s < 0.6 ? "a" : s < 1.1 ? "b" : "c";
    }
    return Dataset(std::move(columns), std::move(labels));
}

}  // namespace

int main(int argc, char** argv) {
    bool quick = false;
    int workers = 0;
    for (int i = 1; i < argc; ++i) {
        if (!std::strcmp(argv[i], "--quick")) quick = true;
        else if (!std::strcmp(argv[i], "--workers") && i + 1 < argc) workers = std::atoi(argv[++i]);
    }
    set_log_level(LogLevel::Quiet);
    const auto serial = ExecPolicy::serial();
    const auto parallel = ExecPolicy::parallel(workers);
    const std::size_t rows = quick ? 600 : 6000;
    const int reps = quick ? 1 : 3;

    std::printf("threads: %d, rows: %zu\n", parallel.threads(), rows);
    std::printf("%-28s %12s %12s %8s\n", "kernel", "serial", "parallel", "speedup");
    bool ok = true;

    const auto data = synthetic(rows, 10, 1);
    ForestConfig fc;
    fc.tree_count = quick ? 20 : 100;
    fc.seed = 3;
    RandomForest forest = RandomForest::train(data, fc, serial);
    {
        std::string a, b;
        const double ts = seconds([&] { a = RandomForest::train(data, fc, serial).to_json().dump(); }, reps);
        const double tp = seconds([&] { b = RandomForest::train(data, fc, parallel).to_json().dump(); }, reps);
        ok &= report("forest train", ts, tp, a == b);
    }
    const auto x = data.matrix();
    {
        ProbabilityMatrix a, b;
        const double ts = seconds([&] { a = forest.predict_proba(x, serial); }, reps);
        const double tp = seconds([&] { b = forest.predict_proba(x, parallel); }, reps);
        ok &= report("forest predict", ts, tp, a.values == b.values);
    }

    const auto bins = fit_entropy_bins(data, predict_labels(forest, x), 8);
    const auto predicted = predict_class(forest, x);
    const EvaluationSet train(apply_bins(data, bins), ModelLabels(predicted, forest.class_order().size()));

    std::vector<Condition> conds;
    for (std::size_t a = 0; a < bins.size(); ++a)
        for (std::size_t b = 0; b < bins.column(a).bin_count(); ++b) conds.emplace_back(a, std::vector<int>{static_cast<int>(b)});
    {
        auto rng = make_rng(5);
        std::vector<Rule> rules;
        for (int t = 0; t < (quick ? 200 : 2000); ++t) {
            std::vector<Condition> rc;
            for (int k = 0; k < 3; ++k) rc.push_back(conds[uniform_index(rng, conds.size())]);
            rules.emplace_back(rc, 0);
        }
        std::size_t a = 0, b = 0;
        const double ts = seconds([&] { for (const auto& r : rules) a += cover_reference(r, train.data).count(); }, reps);
        const double tp = seconds([&] { for (const auto& r : rules) b += cover(r, train).count(); }, reps);
        ok &= report("cover (row scan vs bitset)", ts, tp, a == b);
    }
    {
        GaConfig cfg;
        auto pop = initial_population(conds.size(), cfg, 1);
        auto rng = make_rng(2);
        for (auto& ind : pop) mutate(ind, 4.0 / static_cast<double>(conds.size()), rng);
        std::vector<double> a, b;
        const double ts = seconds([&] {
            FitnessEvaluator ev(conds, 0, train, cfg);
            auto p = pop;
            ev.evaluate_population(p, serial);
            a.clear();
            for (const auto& ind : p) a.push_back(*ind.fitness());
        }, reps);
        const double tp = seconds([&] {
            FitnessEvaluator ev(conds, 0, train, cfg);
            auto p = pop;
            ev.evaluate_population(p, parallel);
            b.clear();
            for (const auto& ind : p) b.push_back(*ind.fitness());
        }, reps);
        ok &= report("GA fitness (1200 individuals)", ts, tp, a == b);
    }
    {
        LimeConfig lc;
        lc.sample_count = quick ? 200 : 1000;
        const LimeExplainer ex(forest, data, train.data, lc);
        std::vector<std::size_t> sample;
        for (std::size_t i = 0; i < (quick ? 8u : 64u); ++i) sample.push_back(i);
        std::vector<std::vector<Condition>> a, b;
        const double ts = seconds([&] { a = explain_rows(ex, sample, 0, 9, serial); }, 1);
        const double tp = seconds([&] { b = explain_rows(ex, sample, 0, 9, parallel); }, 1);
        ok &= report("local surrogate rows", ts, tp, a == b);
    }
    return ok ? 0 : 1;
}
