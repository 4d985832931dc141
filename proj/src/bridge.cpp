#include "csd/bridge.hpp"

#include <netdb.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <csignal>
#include <chrono>
#include <cstring>

#include <json.hpp>

#include "csd/errors.hpp"

namespace csd {
namespace {

using ordered_json = nlohmann::ordered_json;

void ignore_sigpipe_once() {
    static const bool done = [] {
        struct sigaction current {};
        if (sigaction(SIGPIPE, nullptr, &current) == 0 && current.sa_handler == SIG_DFL) {
            std::signal(SIGPIPE, SIG_IGN);
        }
        return true;
    }();
    (void)done;
}

ordered_json ref_or_null(const std::string* ref) { return ref ? ordered_json(*ref) : ordered_json(nullptr); }

int connect_tcp(const std::string& host, std::uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* result = nullptr;
    const std::string service = std::to_string(port);
    if (const int rc = getaddrinfo(host.c_str(), service.c_str(), &hints, &result); rc != 0) {
        throw std::runtime_error("bridge: cannot resolve " + host + ": " + gai_strerror(rc));
    }
    int fd = -1;
    for (addrinfo* a = result; a != nullptr; a = a->ai_next) {
        fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    freeaddrinfo(result);
    if (fd < 0) throw std::runtime_error("bridge: cannot connect to " + host + ":" + service);
    return fd;
}

}  // namespace

void BridgeEndpoint::validate() const {
    if (timeout_ms == 0) throw ContractError("bridge timeout_ms must be > 0");
    if (max_batch == 0) throw ContractError("bridge max_batch must be >= 1");
    if (transport == Transport::Stdio && command.empty()) throw ContractError("stdio bridge needs a command");
    if (transport == Transport::Tcp && (host.empty() || port == 0)) throw ContractError("tcp bridge needs host and port");
}

std::string encode_request(std::uint64_t id, const EpsQuery& query) {
    ordered_json x = ordered_json::array();
    for (Eigen::Index k = 0; k < query.x_t.size(); ++k) x.push_back(query.x_t[k]);

    const std::string* source = nullptr;
    const std::string* text = nullptr;
    if (const auto* img = std::get_if<ImageCondition>(&query.cond)) source = &img->source_ref;
    if (const auto* it = std::get_if<ImageTextCondition>(&query.cond)) {
        source = &it->source_ref;
        text = &it->text_ref;
    }
    ordered_json cond;
    cond["kind"] = std::string(condition_kind(query.cond));
    cond["source_ref"] = ref_or_null(source);
    cond["text_ref"] = ref_or_null(text);
    cond["omega_s"] = query.guidance.omega_s;
    cond["omega_y"] = query.guidance.omega_y;

    ordered_json req;
    req["id"] = id;
    req["x_t"] = std::move(x);
    req["t"] = query.t;
    req["cond"] = std::move(cond);
    return req.dump();
}

BridgeClient::BridgeClient(BridgeEndpoint endpoint)
    : endpoint_(std::move(endpoint)), slots_(static_cast<std::ptrdiff_t>(std::max<std::uint32_t>(1, endpoint_.max_batch))) {
    endpoint_.validate();
    ignore_sigpipe_once();
    if (endpoint_.transport == Transport::Stdio) {
        int to_child[2];
        int from_child[2];
        if (::pipe(to_child) != 0 || ::pipe(from_child) != 0) throw std::runtime_error("bridge: pipe() failed");
        const pid_t pid = ::fork();
        if (pid < 0) throw std::runtime_error("bridge: fork() failed");
        if (pid == 0) {
            ::dup2(to_child[0], STDIN_FILENO);
            ::dup2(from_child[1], STDOUT_FILENO);
            ::close(to_child[0]);
            ::close(to_child[1]);
            ::close(from_child[0]);
            ::close(from_child[1]);
            std::vector<char*> argv;
            for (auto& a : endpoint_.command) argv.push_back(a.data());
            argv.push_back(nullptr);
            ::execvp(argv[0], argv.data());
            ::_exit(127);
        }
        ::close(to_child[0]);
        ::close(from_child[1]);
        child_pid_ = pid;
        write_fd_ = to_child[1];
        read_fd_ = from_child[0];
    } else {
        write_fd_ = connect_tcp(endpoint_.host, endpoint_.port);
        read_fd_ = write_fd_;
    }
    reader_ = std::thread([this] { reader_loop(); });
}

BridgeClient::~BridgeClient() {
    if (endpoint_.transport == Transport::Stdio) {
        ::close(write_fd_);
        // Give the child a moment to exit on EOF, then make sure it does.
        int status = 0;
        bool exited = false;
        for (int i = 0; i < 50 && !exited; ++i) {
            exited = ::waitpid(child_pid_, &status, WNOHANG) == child_pid_;
            if (!exited) std::this_thread::sleep_for(std::chrono::milliseconds(4));
        }
        if (!exited) {
            ::kill(child_pid_, SIGKILL);
            ::waitpid(child_pid_, &status, 0);
        }
        if (reader_.joinable()) reader_.join();
        ::close(read_fd_);
    } else {
        ::shutdown(write_fd_, SHUT_RDWR);
        if (reader_.joinable()) reader_.join();
        ::close(write_fd_);
    }
}

void BridgeClient::release_slot() { slots_.release(); }

void BridgeClient::write_line(const std::string& line) {
    std::lock_guard lock(write_mutex_);
    std::string buf = line;
    buf.push_back('\n');
    std::size_t off = 0;
    while (off < buf.size()) {
        const ssize_t n = ::write(write_fd_, buf.data() + off, buf.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw ProtocolError(std::string("bridge: write failed: ") + std::strerror(errno));
        }
        off += static_cast<std::size_t>(n);
    }
}

std::future<Vector> BridgeClient::submit(const EpsQuery& query, std::uint64_t& id) {
    if (!slots_.try_acquire_for(std::chrono::milliseconds(endpoint_.timeout_ms))) {
        throw BridgeTimeout("bridge: no request slot freed within " + std::to_string(endpoint_.timeout_ms) + " ms");
    }
    std::future<Vector> future;
    {
        std::lock_guard lock(state_mutex_);
        if (!broken_.empty()) {
            release_slot();
            throw ProtocolError(broken_);
        }
        id = next_id_++;
        Pending& p = pending_[id];
        p.dim = query.x_t.size();
        future = p.promise.get_future();
    }
    try {
        write_line(encode_request(id, query));
    } catch (const std::exception& e) {
        fail_all(e.what());
        throw;
    }
    return future;
}

Vector BridgeClient::await(std::future<Vector>& future, std::uint64_t id) {
    if (future.wait_for(std::chrono::milliseconds(endpoint_.timeout_ms)) != std::future_status::ready) {
        std::lock_guard lock(state_mutex_);
        if (pending_.erase(id) > 0) {
            abandoned_.insert(id);
            release_slot();
            throw BridgeTimeout("bridge: request " + std::to_string(id) + " timed out after " +
                                std::to_string(endpoint_.timeout_ms) + " ms");
        }
    }
    return future.get();
}

Vector BridgeClient::eps(const EpsQuery& query) {
    std::uint64_t id = 0;
    auto future = submit(query, id);
    return await(future, id);
}

std::vector<Vector> BridgeClient::eps_batch(const std::vector<EpsQuery>& queries) {
    std::vector<std::pair<std::uint64_t, std::future<Vector>>> inflight;
    inflight.reserve(queries.size());
    for (const auto& q : queries) {
        std::uint64_t id = 0;
        auto f = submit(q, id);
        inflight.emplace_back(id, std::move(f));
    }
    std::vector<Vector> out;
    out.reserve(queries.size());
    for (auto& [id, f] : inflight) out.push_back(await(f, id));
    return out;
}

void BridgeClient::fail_all(const std::string& message) {
    std::lock_guard lock(state_mutex_);
    if (broken_.empty()) broken_ = message;
    for (auto& [id, p] : pending_) {
        p.promise.set_exception(std::make_exception_ptr(ProtocolError(message)));
        release_slot();
    }
    pending_.clear();
}

void BridgeClient::handle_line(const std::string& line) {
    nlohmann::json msg;
    try {
        msg = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
        fail_all("bridge: malformed response line: " + line);
        return;
    }
    const bool valid_id = msg.is_object() && msg.contains("id") &&
                          (msg["id"].is_number_unsigned() ||
                           (msg["id"].is_number_integer() && msg["id"].get<std::int64_t>() >= 0));
    if (!valid_id) {
        fail_all("bridge: response without a valid id: " + line);
        return;
    }
    const auto id = msg["id"].get<std::uint64_t>();

    std::lock_guard lock(state_mutex_);
    const auto it = pending_.find(id);
    if (it == pending_.end()) {
        if (abandoned_.erase(id) > 0) return;  // late answer to a timed-out request
        const std::string message = "bridge: response carries unknown id " + std::to_string(id);
        if (broken_.empty()) broken_ = message;
        for (auto& [pid, p] : pending_) {
            p.promise.set_exception(std::make_exception_ptr(ProtocolError(message)));
            release_slot();
        }
        pending_.clear();
        return;
    }
    Pending p = std::move(it->second);
    pending_.erase(it);
    release_slot();

    if (msg.contains("error")) {
        const auto& err = msg["error"];
        p.promise.set_exception(std::make_exception_ptr(RemoteError(err.is_string() ? err.get<std::string>() : err.dump())));
        return;
    }
    if (!msg.contains("eps") || !msg["eps"].is_array()) {
        p.promise.set_exception(
            std::make_exception_ptr(ProtocolError("bridge: response id " + std::to_string(id) + " has no eps array")));
        return;
    }
    const auto& arr = msg["eps"];
    if (static_cast<Eigen::Index>(arr.size()) != p.dim) {
        p.promise.set_exception(std::make_exception_ptr(
            ProtocolError("bridge: response id " + std::to_string(id) + " has eps dimension " +
                          std::to_string(arr.size()) + ", expected " + std::to_string(p.dim))));
        return;
    }
    Vector eps(p.dim);
    for (Eigen::Index k = 0; k < p.dim; ++k) {
        const auto& v = arr[static_cast<std::size_t>(k)];
        if (!v.is_number()) {
            p.promise.set_exception(std::make_exception_ptr(
                ProtocolError("bridge: response id " + std::to_string(id) + " has a non-numeric eps entry")));
            return;
        }
        eps[k] = v.get<double>();
    }
    p.promise.set_value(std::move(eps));
}

void BridgeClient::reader_loop() {
    std::string buffer;
    char chunk[4096];
    for (;;) {
        const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) break;
        buffer.append(chunk, static_cast<std::size_t>(n));
        std::size_t start = 0;
        for (std::size_t nl; (nl = buffer.find('\n', start)) != std::string::npos; start = nl + 1) {
            std::string line = buffer.substr(start, nl - start);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) handle_line(line);
        }
        buffer.erase(0, start);
    }
    fail_all("bridge: connection closed by server");
}

BridgeOracle::BridgeOracle(BridgeEndpoint endpoint) : client_(std::make_unique<BridgeClient>(std::move(endpoint))) {}

Vector BridgeOracle::eps(const NoiseSchedule&, const Vector& x_t, double t, const Condition& cond,
                         const GuidanceParams& g) const {
    return client_->eps({x_t, t, cond, g});
}

}  // namespace csd
