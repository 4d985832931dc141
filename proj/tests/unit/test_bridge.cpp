#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include <unistd.h>

#include <json.hpp>

#include "csd/bridge.hpp"
#include "csd/canvas.hpp"
#include "csd/config.hpp"
#include "csd/errors.hpp"
#include "csd/rng.hpp"

using namespace csd;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const json kSpec = json::parse(R"({
  "unconditional": {"dim": 3, "means": [0.0, [1, -1, 0.5]], "variances": [1.0, [0.5, 0.7, 0.9]], "weights": [0.4, 0.6]},
  "image": {"src": {"dim": 3, "means": [[0.2, 0.1, -0.3]], "variances": [0.6]}},
  "image_text": {"src": {"txt": {"dim": 3, "means": [1.0, -1.0], "variances": [0.5, 0.4]}}}
})");

const NoiseSchedule kSchedule{ScheduleKind::VpCosine, 0.2, 0.5};

fs::path spec_file() {
    static const fs::path path = [] {
        const fs::path p = fs::temp_directory_path() / ("csd_bridge_oracle_" + std::to_string(::getpid()) + ".json");
        std::ofstream(p) << kSpec.dump();
        return p;
    }();
    return path;
}

BridgeEndpoint stdio_endpoint(std::vector<std::string> extra = {}, std::uint32_t timeout_ms = 5000) {
    BridgeEndpoint e;
    e.transport = Transport::Stdio;
    e.command = {EPS_SERVER_PATH, "--oracle", spec_file().string()};
    e.command.insert(e.command.end(), extra.begin(), extra.end());
    e.timeout_ms = timeout_ms;
    e.max_batch = 4;
    e.dim = 3;
    return e;
}

// Starts the fixture in TCP mode; it prints its port and serves one connection.
struct TcpServer {
    FILE* pipe = nullptr;
    std::uint16_t port = 0;

    explicit TcpServer(const std::string& extra = "") {
        const std::string cmd = std::string(EPS_SERVER_PATH) + " --tcp --oracle " + spec_file().string() + " " + extra;
        pipe = ::popen(cmd.c_str(), "r");
        unsigned p = 0;
        if (pipe == nullptr || std::fscanf(pipe, "%u", &p) != 1) throw std::runtime_error("fixture did not start");
        port = static_cast<std::uint16_t>(p);
    }
    ~TcpServer() {
        if (pipe) ::pclose(pipe);
    }

    BridgeEndpoint endpoint() const {
        BridgeEndpoint e;
        e.transport = Transport::Tcp;
        e.host = "127.0.0.1";
        e.port = port;
        e.timeout_ms = 5000;
        e.max_batch = 4;
        e.dim = 3;
        return e;
    }
};

std::vector<EpsQuery> random_queries(std::uint64_t seed, std::size_t n) {
    Rng rng = derive_stream(seed, "test/bridge");
    std::uniform_real_distribution<> ut(0.05, 1.0), ug(0.0, 10.0);
    const std::vector<Condition> conds = {Unconditional{}, ImageCondition{"src"}, ImageTextCondition{"src", "txt"}};
    std::vector<EpsQuery> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back({2.0 * standard_normal(rng, 3), ut(rng), conds[i % 3], GuidanceParams{ug(rng), ug(rng)}});
    }
    return out;
}

}  // namespace

TEST(BridgeWire, EncodeRequest) {
    EpsQuery q{(Vector(2) << 0.5, -1.25).finished(), 0.3, ImageTextCondition{"src", "txt"}, GuidanceParams{7.5, 1.5}};
    EXPECT_EQ(encode_request(7, q),
              R"({"id":7,"x_t":[0.5,-1.25],"t":0.3,"cond":{"kind":"image_text","source_ref":"src","text_ref":"txt","omega_s":1.5,"omega_y":7.5}})");
    q.cond = Unconditional{};
    q.x_t = Vector::Constant(1, 0.1);
    EXPECT_EQ(encode_request(1, q),
              R"({"id":1,"x_t":[0.1],"t":0.3,"cond":{"kind":"unconditional","source_ref":null,"text_ref":null,"omega_s":1.5,"omega_y":7.5}})");
    q.cond = ImageCondition{"a"};
    EXPECT_NE(encode_request(2, q).find(R"("kind":"image","source_ref":"a","text_ref":null)"), std::string::npos);
}

TEST(BridgeWire, EncodedNumbersRoundTrip) {
    Rng rng = derive_stream(1, "test");
    EpsQuery q{standard_normal(rng, 50) * 1e-3, 0.123456789012345678, Unconditional{}, GuidanceParams{}};
    const json j = json::parse(encode_request(3, q));
    for (Eigen::Index i = 0; i < 50; ++i) EXPECT_EQ(j["x_t"][static_cast<std::size_t>(i)].get<double>(), q.x_t[i]);
    EXPECT_EQ(j["t"].get<double>(), q.t);
}

TEST(BridgeEndpointTest, Validate) {
    BridgeEndpoint e = stdio_endpoint();
    EXPECT_NO_THROW(e.validate());
    e.timeout_ms = 0;
    EXPECT_ANY_THROW(e.validate());
    e = stdio_endpoint();
    e.max_batch = 0;
    EXPECT_ANY_THROW(e.validate());
    e = stdio_endpoint();
    e.command.clear();
    EXPECT_ANY_THROW(e.validate());
    BridgeEndpoint t;
    t.transport = Transport::Tcp;
    EXPECT_ANY_THROW(t.validate());
}

TEST(BridgeParity, StdioMatchesInProcess) {
    const EditOracle local = edit_oracle_from_json(kSpec);
    BridgeClient client(stdio_endpoint());
    for (const auto& q : random_queries(2, 50)) {
        const Vector expected = local.eps(kSchedule, q.x_t, q.t, q.cond, q.guidance);
        EXPECT_LE((client.eps(q) - expected).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(BridgeParity, TcpMatchesInProcess) {
    const EditOracle local = edit_oracle_from_json(kSpec);
    TcpServer server;
    BridgeClient client(server.endpoint());
    for (const auto& q : random_queries(3, 50)) {
        const Vector expected = local.eps(kSchedule, q.x_t, q.t, q.cond, q.guidance);
        EXPECT_LE((client.eps(q) - expected).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(BridgePipelining, BatchEqualsSerialEvenWhenAnswersArriveReversed) {
    const auto queries = random_queries(4, 24);
    std::vector<Vector> serial;
    {
        BridgeClient client(stdio_endpoint());
        for (const auto& q : queries) serial.push_back(client.eps(q));
    }
    BridgeClient reversed(stdio_endpoint({"--reverse", "4"}));
    const auto batch = reversed.eps_batch(queries);
    ASSERT_EQ(batch.size(), serial.size());
    for (std::size_t i = 0; i < serial.size(); ++i) EXPECT_EQ(batch[i], serial[i]) << i;

    TcpServer server("--reverse 2");
    BridgeClient tcp(server.endpoint());
    const auto over_tcp = tcp.eps_batch(queries);
    for (std::size_t i = 0; i < serial.size(); ++i) EXPECT_EQ(over_tcp[i], serial[i]) << i;
}

TEST(BridgePipelining, ConcurrentCallers) {
    const EditOracle local = edit_oracle_from_json(kSpec);
    BridgeClient client(stdio_endpoint());
    const auto queries = random_queries(5, 40);
    std::vector<Vector> results(queries.size());
    std::vector<std::thread> workers;
    for (int w = 0; w < 4; ++w) {
        workers.emplace_back([&, w] {
            for (std::size_t i = static_cast<std::size_t>(w); i < queries.size(); i += 4) results[i] = client.eps(queries[i]);
        });
    }
    for (auto& t : workers) t.join();
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const auto& q = queries[i];
        EXPECT_LE((results[i] - local.eps(kSchedule, q.x_t, q.t, q.cond, q.guidance)).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(BridgeErrors, StalledServerTimesOut) {
    BridgeClient client(stdio_endpoint({"--stall-after", "1"}, 300));
    const auto q = random_queries(6, 2);
    EXPECT_NO_THROW(client.eps(q[0]));
    try {
        client.eps(q[1]);
        FAIL() << "expected BridgeTimeout";
    } catch (const BridgeTimeout& e) {
        EXPECT_TRUE(e.retryable());
    }
}

TEST(BridgeErrors, UnknownIdIsProtocolError) {
    BridgeClient client(stdio_endpoint({"--bad-id"}));
    try {
        client.eps(random_queries(7, 1)[0]);
        FAIL() << "expected ProtocolError";
    } catch (const ProtocolError& e) {
        EXPECT_NE(std::string(e.what()).find("unknown id 1001"), std::string::npos) << e.what();
    }
}

TEST(BridgeErrors, ServerErrorVerbatim) {
    BridgeClient client(stdio_endpoint({"--error", "model exploded: NaN in layer 3"}));
    try {
        client.eps(random_queries(8, 1)[0]);
        FAIL() << "expected RemoteError";
    } catch (const RemoteError& e) {
        EXPECT_STREQ(e.what(), "model exploded: NaN in layer 3");
    }
}

TEST(BridgeErrors, WrongDimension) {
    BridgeClient client(stdio_endpoint({"--wrong-dim"}));
    EXPECT_THROW(client.eps(random_queries(9, 1)[0]), ProtocolError);
}

TEST(BridgeErrors, UnknownRefSurfacesServerMessage) {
    BridgeClient client(stdio_endpoint());
    EpsQuery q = random_queries(10, 1)[0];
    q.cond = ImageCondition{"elsewhere"};
    try {
        client.eps(q);
        FAIL() << "expected RemoteError";
    } catch (const RemoteError& e) {
        EXPECT_NE(std::string(e.what()).find("elsewhere"), std::string::npos);
    }
    EXPECT_NO_THROW(client.eps(random_queries(10, 1)[0]));
}

TEST(BridgeErrors, DeadServer) {
    BridgeEndpoint e = stdio_endpoint();
    e.command = {"/bin/false"};
    EXPECT_ANY_THROW({
        BridgeClient client(e);
        client.eps(random_queries(11, 1)[0]);
    });
}

TEST(BridgeOracleTest, DrivesCanvasEditLikeLocalOracle) {
    const json spec = json::parse(R"({
      "unconditional": {"dim": 4, "means": [0.0], "variances": [0.5]},
      "image": {"src": {"dim": 4, "means": [0.0], "variances": [0.5]}},
      "image_text": {"src": {"txt": {"dim": 4, "means": [1.0, -1.0], "variances": [0.5, 0.5]}}}
    })");
    const fs::path p = fs::temp_directory_path() / ("csd_bridge_canvas_" + std::to_string(::getpid()) + ".json");
    std::ofstream(p) << spec.dump();
    BridgeEndpoint e;
    e.command = {EPS_SERVER_PATH, "--oracle", p.string()};
    e.dim = 4;
    const BridgeOracle remote(e);
    const EditOracle local = edit_oracle_from_json(spec);

    Canvas src = Canvas::zeros(2, 6, 1);
    Rng rng = derive_stream(12, "test");
    src.values = 0.3 * standard_normal(rng, 12);
    const auto grid = PatchGrid::build(2, 6, 2, 1);
    DistillConfig cfg;
    cfg.steps = 10;
    const Condition cond = ImageTextCondition{"src", "txt"};
    const auto a = edit_canvas(src, grid, remote, cond, cfg, 3, 1);
    const auto b = edit_canvas(src, grid, local, cond, cfg, 3, 1);
    EXPECT_LE((a.canvas.values - b.canvas.values).cwiseAbs().maxCoeff(), 1e-9);
}
