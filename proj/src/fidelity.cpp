#include "magix/fidelity.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>

#include "magix/error.hpp"
#include "magix/random.hpp"

namespace magix {

using nlohmann::json;

ProxyModel build_proxy(std::span<const RuleSet> per_class, std::size_t k, std::uint64_t seed) {
    if (k < 1) throw ConfigError("K must be at least 1");
    ProxyModel proxy;
    proxy.seed = seed;
    proxy.requested_k = k;
    for (const auto& rs : per_class) proxy.rules.insert(proxy.rules.end(), rs.begin(), rs.end());
    std::sort(proxy.rules.begin(), proxy.rules.end(), ranks_before);
    if (proxy.rules.size() > k) proxy.rules.resize(k);
    proxy.effective_k = proxy.rules.size();
    return proxy;
}

namespace {

template <typename Covers>
std::optional<std::size_t> decide(const ProxyModel& proxy, std::size_t row, Covers&& covers) {
    std::vector<std::size_t> best;
    double best_precision = -1.0;
    for (std::size_t i = 0; i < proxy.rules.size(); ++i) {
        if (!covers(i)) continue;
        const double p = proxy.rules[i].stats.precision;
        if (p > best_precision) {
            best_precision = p;
            best.assign(1, i);
        } else if (p == best_precision) {
            best.push_back(i);
        }
    }
    if (best.empty()) return std::nullopt;
    if (best.size() == 1) return proxy.rules[best.front()].rule.target_class;
    auto rng = make_rng(derive_seed(proxy.seed, "proxy", row));
    return proxy.rules[best[static_cast<std::size_t>(uniform_index(rng, best.size()))]].rule.target_class;
}

}  // namespace

std::optional<std::size_t> proxy_predict(const ProxyModel& proxy, const BinnedData& data, std::size_t row) {
    return decide(proxy, row, [&](std::size_t i) { return proxy.rules[i].rule.covers(data, row); });
}

std::vector<std::optional<std::size_t>> proxy_predict_all(const ProxyModel& proxy, const EvaluationSet& eval,
                                                          const ExecPolicy& exec) {
    std::vector<RowSet> covers;
    covers.reserve(proxy.rules.size());
    for (const auto& r : proxy.rules) covers.push_back(cover(r.rule, eval));
    std::vector<std::optional<std::size_t>> out(eval.rows());
    parallel_for(exec, eval.rows(), [&](std::size_t row) {
        out[row] = decide(proxy, row, [&](std::size_t i) { return covers[i].test(row); });
    });
    return out;
}

json ImitationCurve::to_json() const {
    json pts = json::array();
    for (const auto& p : points)
        pts.push_back({{"k", p.k}, {"effective_k", p.effective_k}, {"imitation", p.imitation}, {"coverage", p.coverage}});
    return json{{"points", pts}};
}

ImitationCurve ImitationCurve::from_json(const json& doc) {
    ImitationCurve c;
    for (const auto& p : doc.at("points")) {
        ImitationPoint pt;
        pt.k = p.at("k").get<std::size_t>();
        pt.effective_k = p.value("effective_k", pt.k);
        pt.imitation = p.at("imitation").get<double>();
        pt.coverage = p.value("coverage", 0.0);
        c.points.push_back(pt);
    }
    return c;
}

std::string ImitationCurve::to_text(std::string_view label) const {
    const int name_width = static_cast<int>(std::max<std::size_t>(label.size(), 7));
    char buf[64];
    std::string head, row;
    std::snprintf(buf, sizeof buf, "%-*s", name_width, "Dataset");
    head += buf;
    std::snprintf(buf, sizeof buf, "%-*.*s", name_width, static_cast<int>(label.size()), label.data());
    row += buf;
    for (const auto& p : points) {
        const auto col = "Im@" + std::to_string(p.k);
        std::snprintf(buf, sizeof buf, "  %7s", col.c_str());
        head += buf;
        std::snprintf(buf, sizeof buf, "  %7.2f", 100.0 * p.imitation);
        row += buf;
    }
    return head + "\n" + row + "\n";
}

std::vector<std::size_t> parse_ks(std::string_view text) {
    std::vector<std::size_t> ks;
    while (!text.empty()) {
        const auto comma = text.find(',');
        const auto item = text.substr(0, comma);
        std::size_t k = 0;
        const auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), k);
        if (ec != std::errc{} || end != item.data() + item.size() || k == 0)
            throw ConfigError("invalid K value '" + std::string(item) + "'");
        if (!ks.empty() && k <= ks.back()) throw ConfigError("K values must be strictly increasing");
        ks.push_back(k);
        if (comma == std::string_view::npos) break;
        text.remove_prefix(comma + 1);
    }
    if (ks.empty()) throw ConfigError("no K values given");
    return ks;
}

ImitationCurve imitation_at_k(std::span<const RuleSet> per_class, const EvaluationSet& test,
                              std::span<const std::size_t> ks, std::uint64_t seed, const ExecPolicy& exec) {
    if (test.rows() == 0) throw Error("imitation needs a non-empty test set");
    if (ks.empty()) throw ConfigError("no K values given");
    ImitationCurve curve;
    for (std::size_t i = 0; i < ks.size(); ++i) {
        if (i > 0 && ks[i] <= ks[i - 1]) throw ConfigError("K values must be strictly increasing");
        const auto proxy = build_proxy(per_class, ks[i], seed);
        const auto pred = proxy_predict_all(proxy, test, exec);
        std::size_t agree = 0, covered = 0;
        for (std::size_t r = 0; r < pred.size(); ++r) {
            covered += pred[r].has_value();
            agree += pred[r] && *pred[r] == test.labels.predicted[r];
        }
        const auto n = static_cast<double>(test.rows());
        curve.points.push_back({ks[i], proxy.effective_k, agree / n, covered / n});
    }
    return curve;
}

}  // namespace magix
