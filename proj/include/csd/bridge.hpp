#pragma once

#include <condition_variable>
#include <cstdint>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "csd/oracle.hpp"

namespace csd {

/// The remote side did not answer within the endpoint's timeout. Retrying is safe.
class BridgeTimeout : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    bool retryable() const noexcept { return true; }
};

/// The remote side broke the wire protocol (bad line, unknown id, wrong dimension).
class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The server answered with {"id":N,"error":"msg"}; what() is msg verbatim.
class RemoteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Transport { Stdio, Tcp };

struct BridgeEndpoint {
    Transport transport = Transport::Stdio;
    std::vector<std::string> command;  // stdio: argv of the child process
    std::string host = "127.0.0.1";    // tcp
    std::uint16_t port = 0;            // tcp
    std::uint32_t timeout_ms = 10000;
    std::uint32_t max_batch = 8;
    Eigen::Index dim = 0;  // expected eps dimension; 0 = take it from each request

    void validate() const;
};

/// One eps query.
struct EpsQuery {
    Vector x_t;
    double t = 0.0;
    Condition cond;
    GuidanceParams guidance;
};

/// Request line (no trailing newline):
/// {"id":N,"x_t":[...],"t":F,"cond":{"kind":K,"source_ref":S,"text_ref":T,"omega_s":F,"omega_y":F}}
/// Absent refs are null.
std::string encode_request(std::uint64_t id, const EpsQuery& query);

/// Newline-delimited JSON client over a child process's stdio or a TCP socket.
/// A reader thread correlates responses by id; at most max_batch requests are
/// in flight. Thread-safe.
class BridgeClient {
public:
    explicit BridgeClient(BridgeEndpoint endpoint);
    ~BridgeClient();

    BridgeClient(const BridgeClient&) = delete;
    BridgeClient& operator=(const BridgeClient&) = delete;

    /// One round-trip. Throws BridgeTimeout, ProtocolError or RemoteError.
    Vector eps(const EpsQuery& query);

    /// Pipelined: keeps up to max_batch requests in flight; results in query order.
    std::vector<Vector> eps_batch(const std::vector<EpsQuery>& queries);

    const BridgeEndpoint& endpoint() const { return endpoint_; }

private:
    struct Pending {
        std::promise<Vector> promise;
        Eigen::Index dim = 0;
    };

    std::future<Vector> submit(const EpsQuery& query, std::uint64_t& id);
    Vector await(std::future<Vector>& future, std::uint64_t id);
    void write_line(const std::string& line);
    void reader_loop();
    void handle_line(const std::string& line);
    void fail_all(const std::string& message);
    void release_slot();

    BridgeEndpoint endpoint_;
    int write_fd_ = -1;
    int read_fd_ = -1;
    int child_pid_ = -1;

    std::mutex write_mutex_;
    std::mutex state_mutex_;
    std::map<std::uint64_t, Pending> pending_;
    std::set<std::uint64_t> abandoned_;
    std::uint64_t next_id_ = 1;
    std::string broken_;  // non-empty once the connection is unusable
    std::counting_semaphore<> slots_;
    std::thread reader_;
};

/// remote_eps: ScoreOracle backed by a BridgeClient. The schedule argument is
/// ignored; the server owns its schedule.
class BridgeOracle final : public ScoreOracle {
public:
    explicit BridgeOracle(BridgeEndpoint endpoint);

    Eigen::Index dim() const override { return client_->endpoint().dim; }
    Vector eps(const NoiseSchedule& schedule, const Vector& x_t, double t, const Condition& cond,
               const GuidanceParams& g) const override;

    BridgeClient& client() const { return *client_; }

private:
    std::unique_ptr<BridgeClient> client_;
};

}  // namespace csd
