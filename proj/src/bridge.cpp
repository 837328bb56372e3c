#include "magix/bridge.hpp"

#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>
#include <limits>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include "magix/error.hpp"

namespace magix {

using nlohmann::json;

namespace {

constexpr std::size_t kStderrTail = 4096;

void close_fd(int& fd) noexcept {
    if (fd >= 0) ::close(fd);
    fd = -1;
}

}  // namespace

json instances_to_json(const FeatureMatrix& x, std::size_t first, std::size_t count) {
    json rows = json::array();
    for (std::size_t i = first; i < first + count; ++i) {
        json row = json::array();
        for (double v : x.row(i)) row.push_back(std::isnan(v) ? json(nullptr) : json(v));
        rows.push_back(std::move(row));
    }
    return rows;
}

FeatureMatrix instances_from_json(const json& rows) {
    if (!rows.is_array()) throw ParseError("instances must be an array");
    const std::size_t cols = rows.empty() ? 0 : rows.front().size();
    FeatureMatrix x(rows.size(), cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!rows[i].is_array() || rows[i].size() != cols) throw ParseError("instances are not rectangular");
        for (std::size_t j = 0; j < cols; ++j)
            x.at(i, j) = rows[i][j].is_null() ? std::numeric_limits<double>::quiet_NaN() : rows[i][j].get<double>();
    }
    return x;
}

BridgeClassifier::BridgeClassifier(BridgeOptions options) : options_(std::move(options)) {
    if (options_.batch_size == 0) throw ConfigError("bridge batch size must be positive");
    std::signal(SIGPIPE, SIG_IGN);

    int in[2], out[2], err[2];
    if (::pipe(in) != 0 || ::pipe(out) != 0 || ::pipe(err) != 0)
        throw TransportError(std::string("pipe: ") + std::strerror(errno));
    const auto program = options_.adapter.string();
    std::vector<std::string> args{program};
    args.insert(args.end(), options_.arguments.begin(), options_.arguments.end());
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);

    pid_ = ::fork();
    if (pid_ < 0) throw TransportError(std::string("fork: ") + std::strerror(errno));
    if (pid_ == 0) {
        ::dup2(in[0], STDIN_FILENO);
        ::dup2(out[1], STDOUT_FILENO);
        ::dup2(err[1], STDERR_FILENO);
        for (int fd : {in[0], in[1], out[0], out[1], err[0], err[1]}) ::close(fd);
        ::execvp(program.c_str(), argv.data());
        const std::string msg = "cannot execute adapter " + program + ": " + std::strerror(errno) + "\n";
        [[maybe_unused]] auto n = ::write(STDERR_FILENO, msg.data(), msg.size());
        ::_exit(127);
    }
    ::close(in[0]);
    ::close(out[1]);
    ::close(err[1]);
    to_child_ = in[1];
    from_child_ = out[0];
    err_child_ = err[0];
    ::fcntl(to_child_, F_SETFD, FD_CLOEXEC);
    ::fcntl(from_child_, F_SETFD, FD_CLOEXEC);
    ::fcntl(err_child_, F_SETFD, FD_CLOEXEC);

    try {
        const auto meta = round_trip({{"op", "meta"}});
        class_order_ = meta.at("class_order").get<std::vector<std::string>>();
        feature_count_ = meta.at("feature_count").get<std::size_t>();
    } catch (const json::exception& e) {
        shutdown();
        throw TransportError(std::string("malformed meta response: ") + e.what());
    } catch (...) {
        shutdown();
        throw;
    }
    if (class_order_.empty()) {
        shutdown();
        throw TransportError("adapter reported an empty class order");
    }
}

BridgeClassifier::~BridgeClassifier() { shutdown(); }

void BridgeClassifier::shutdown() noexcept {
    close_fd(to_child_);
    if (pid_ > 0) {
        // Give the adapter a moment to exit on end-of-input.
        for (int i = 0; i < 50; ++i) {
            if (::waitpid(pid_, nullptr, WNOHANG) == pid_) {
                pid_ = -1;
                break;
            }
            ::usleep(10000);
        }
        if (pid_ > 0) {
            ::kill(pid_, SIGKILL);
            ::waitpid(pid_, nullptr, 0);
            pid_ = -1;
        }
    }
    close_fd(from_child_);
    close_fd(err_child_);
}

void BridgeClassifier::drain_stderr() const {
    if (err_child_ < 0) return;
    char buf[4096];
    while (true) {
        pollfd p{err_child_, POLLIN, 0};
        if (::poll(&p, 1, 0) <= 0 || !(p.revents & (POLLIN | POLLHUP))) return;
        const auto n = ::read(err_child_, buf, sizeof buf);
        if (n <= 0) return;
        stderr_.append(buf, static_cast<std::size_t>(n));
        if (stderr_.size() > kStderrTail) stderr_.erase(0, stderr_.size() - kStderrTail);
    }
}

std::string BridgeClassifier::stderr_tail() const {
    std::lock_guard lock(mutex_);
    drain_stderr();
    return stderr_;
}

std::uint64_t BridgeClassifier::requests_sent() const {
    std::lock_guard lock(mutex_);
    return static_cast<std::uint64_t>(next_id_ - 1);
}

void BridgeClassifier::fail(std::int64_t id, const std::string& what) const {
    broken_ = true;
    drain_stderr();
    if (pid_ > 0) ::kill(pid_, SIGKILL);
    std::string msg = "bridge request " + std::to_string(id) + ": " + what;
    if (!stderr_.empty()) msg += "; adapter stderr: " + stderr_;
    throw TransportError(msg);
}

json BridgeClassifier::round_trip(json request) const {
    const auto id = next_id_++;
    if (broken_) throw TransportError("bridge request " + std::to_string(id) + ": channel is closed after an earlier failure");
    request["id"] = id;
    const auto line = request.dump() + "\n";
    for (std::size_t off = 0; off < line.size();) {
        const auto n = ::write(to_child_, line.data() + off, line.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            fail(id, std::string("write failed: ") + std::strerror(errno));
        }
        off += static_cast<std::size_t>(n);
    }

    const auto deadline = std::chrono::steady_clock::now() + options_.timeout;
    while (true) {
        for (auto nl = read_buffer_.find('\n'); nl != std::string::npos; nl = read_buffer_.find('\n')) {
            const auto text = read_buffer_.substr(0, nl);
            read_buffer_.erase(0, nl + 1);
            if (text.empty()) continue;
            json response;
            try {
                response = json::parse(text);
            } catch (const json::exception&) {
                fail(id, "adapter wrote a line that is not JSON");
            }
            const auto rid = response.value("id", std::int64_t{-1});
            if (rid != id) fail(id, "response id " + std::to_string(rid) + " does not match");
            if (response.contains("error") && !response["error"].is_null())
                throw TransportError("bridge request " + std::to_string(id) + ": adapter error: " +
                                     response["error"].get<std::string>());
            return response;
        }
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) fail(id, "timed out after " + std::to_string(options_.timeout.count()) + " ms");
        pollfd fds[2] = {{from_child_, POLLIN, 0}, {err_child_, POLLIN, 0}};
        const int ready = ::poll(fds, 2, static_cast<int>(left.count()));
        if (ready < 0) {
            if (errno == EINTR) continue;
            fail(id, std::string("poll failed: ") + std::strerror(errno));
        }
        if (fds[1].revents & POLLIN) drain_stderr();
        if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
            char buf[65536];
            const auto n = ::read(from_child_, buf, sizeof buf);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) fail(id, "adapter exited before answering");
            read_buffer_.append(buf, static_cast<std::size_t>(n));
        }
    }
}

ProbabilityMatrix BridgeClassifier::predict_proba(const FeatureMatrix& instances, const ExecPolicy&) const {
    ProbabilityMatrix out(instances.rows, class_order_.size());
    if (instances.rows == 0) return out;
    if (instances.cols != feature_count_)
        throw ConfigError("instances have " + std::to_string(instances.cols) + " features, adapter expects " +
                          std::to_string(feature_count_));
    std::lock_guard lock(mutex_);
    for (std::size_t first = 0; first < instances.rows; first += options_.batch_size) {
        const auto count = std::min(options_.batch_size, instances.rows - first);
        const auto response =
            round_trip({{"op", "predict_proba"}, {"instances", instances_to_json(instances, first, count)}});
        const auto id = response.at("id").get<std::int64_t>();
        const auto& probs = response.contains("probabilities") ? response["probabilities"] : json();
        if (!probs.is_array() || probs.size() != count) fail(id, "wrong number of probability vectors");
        for (std::size_t i = 0; i < count; ++i) {
            if (!probs[i].is_array() || probs[i].size() != class_order_.size())
                fail(id, "probability vector has the wrong length");
            for (std::size_t c = 0; c < class_order_.size(); ++c) out.row(first + i)[c] = probs[i][c].get<double>();
        }
    }
    return out;
}

}  // namespace magix
