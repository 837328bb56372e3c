// Stand-in for an external model adapter: serves a saved builtin forest over
// the line-delimited JSON protocol.
//
//   fake_adapter <model.json> [--exit-after N] [--hang-after N] [--fail-on N] [--noise]
//
// --exit-after N   exit without answering request N (simulates a crash)
// --hang-after N   stop answering from request N on (simulates a stall)
// --fail-on N     answer request N with an error field
// --noise          write a line to stderr before every answer

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>

#include <json.hpp>

#include "magix/bridge.hpp"
#include "magix/forest.hpp"

using nlohmann::json;

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: fake_adapter <model.json> [--exit-after N] [--hang-after N] [--fail-on N] [--noise]\n";
        return 2;
    }
    long exit_after = -1, hang_after = -1, fail_on = -1;
    bool noise = false;
    for (int i = 2; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--exit-after" && i + 1 < argc) exit_after = std::atol(argv[++i]);
        else if (a == "--hang-after" && i + 1 < argc) hang_after = std::atol(argv[++i]);
        else if (a == "--fail-on" && i + 1 < argc) fail_on = std::atol(argv[++i]);
        else if (a == "--noise") noise = true;
    }

    const auto forest = magix::RandomForest::load(argv[1]);
    std::string line;
    long seen = 0;
    while (std::getline(std::cin, line)) {
        ++seen;
        if (seen == exit_after) {
            std::cerr << "fake adapter: simulated crash on request " << seen << std::endl;
            return 3;
        }
        if (hang_after > 0 && seen >= hang_after) {
            std::this_thread::sleep_for(std::chrono::hours(1));
        }
        if (noise) std::cerr << "fake adapter: request " << seen << std::endl;
        json response;
        try {
            const auto request = json::parse(line);
            response["id"] = request.at("id");
            const auto op = request.at("op").get<std::string>();
            if (seen == fail_on) throw std::runtime_error("simulated failure");
            if (op == "meta") {
                response["class_order"] = forest.class_order();
                response["feature_count"] = forest.feature_count();
            } else if (op == "predict_proba") {
                const auto x = magix::instances_from_json(request.at("instances"));
                if (x.rows > 0 && x.cols != forest.feature_count()) throw std::runtime_error("feature count mismatch");
                const auto p = forest.predict_proba(x);
                json rows = json::array();
                for (std::size_t i = 0; i < p.rows; ++i) {
                    const auto r = p.row(i);
                    rows.push_back(std::vector<double>(r.begin(), r.end()));
                }
                response["probabilities"] = rows;
            } else {
                throw std::runtime_error("unknown op '" + op + "'");
            }
        } catch (const json::parse_error&) {
            response = {{"id", -1}, {"error", "malformed JSON"}};
        } catch (const std::exception& e) {
            response["error"] = e.what();
        }
        std::cout << response.dump() << "\n" << std::flush;
    }
    return 0;
}
