#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "magix/model.hpp"

namespace magix {

struct BridgeOptions {
    std::filesystem::path adapter;       // executable
    std::vector<std::string> arguments;  // usually the model artifact path
    std::chrono::milliseconds timeout{60000};
    std::size_t batch_size = 512;
};

/// Host side of the line-delimited JSON protocol. Spawns the adapter,
/// exchanges "meta" on construction and serves predict_proba by batches.
/// Requests are serialized over one channel, so concurrent callers are safe.
class BridgeClassifier final : public Classifier {
public:
    explicit BridgeClassifier(BridgeOptions options);
    ~BridgeClassifier() override;

    BridgeClassifier(const BridgeClassifier&) = delete;
    BridgeClassifier& operator=(const BridgeClassifier&) = delete;

    const std::vector<std::string>& class_order() const override { return class_order_; }
    std::size_t feature_count() const override { return feature_count_; }
    std::string kind() const override { return "external-bridge"; }
    ProbabilityMatrix predict_proba(const FeatureMatrix& instances,
                                    const ExecPolicy& exec = ExecPolicy::serial()) const override;

    /// Last bytes the adapter wrote to stderr.
    std::string stderr_tail() const;
    std::uint64_t requests_sent() const;

private:
    nlohmann::json round_trip(nlohmann::json request) const;
    [[noreturn]] void fail(std::int64_t id, const std::string& what) const;
    void drain_stderr() const;
    void shutdown() noexcept;

    BridgeOptions options_;
    int pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    int err_child_ = -1;
    std::vector<std::string> class_order_;
    std::size_t feature_count_ = 0;

    mutable std::mutex mutex_;
    mutable std::int64_t next_id_ = 1;
    mutable std::string read_buffer_;
    mutable std::string stderr_;
    mutable bool broken_ = false;
};

/// Protocol encoding helpers; missing values travel as null.
nlohmann::json instances_to_json(const FeatureMatrix& x, std::size_t first, std::size_t count);
FeatureMatrix instances_from_json(const nlohmann::json& rows);

}  // namespace magix
