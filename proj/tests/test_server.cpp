#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <thread>

#include "doctest.h"
#include "mstream/errors.hpp"
#include "mstream/server.hpp"
#include "transcript.hpp"

using namespace mstream;
using protocol::Json;

namespace {

// Minimal blocking TCP client with a receive timeout.
class Client {
public:
    explicit Client(std::uint16_t port) {
        fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        sockaddr_in a{};
        a.sin_family = AF_INET;
        a.sin_port = htons(port);
        ::inet_pton(AF_INET, "127.0.0.1", &a.sin_addr);
        REQUIRE(::connect(fd_, reinterpret_cast<sockaddr*>(&a), sizeof(a)) == 0);
    }
    ~Client() { ::close(fd_); }

    void send(std::string_view bytes) {
        while (!bytes.empty()) {
            const ssize_t n = ::send(fd_, bytes.data(), bytes.size(), MSG_NOSIGNAL);
            REQUIRE(n > 0);
            bytes.remove_prefix(static_cast<std::size_t>(n));
        }
    }
    // Appends to buffer; false on EOF or timeout.
    bool read_more(int timeout_ms = 5000) {
        pollfd p{fd_, POLLIN, 0};
        if (::poll(&p, 1, timeout_ms) <= 0) return false;
        char buf[65536];
        const ssize_t n = ::recv(fd_, buf, sizeof(buf), 0);
        if (n <= 0) return false;
        buffer.append(buf, static_cast<std::size_t>(n));
        return true;
    }
    std::string read_all() {
        while (read_more()) {
        }
        return buffer;
    }
    void close_write() { ::shutdown(fd_, SHUT_WR); }

    std::string buffer;

private:
    int fd_ = -1;
};

// Server on an ephemeral port, running on a background thread.
struct RunningServer {
    explicit RunningServer(AppConfig cfg, std::filesystem::path ui = {})
        : service(std::move(cfg)), server(service, ServerOptions{"127.0.0.1", 0, std::move(ui)}) {
        server.bind();
        thread = std::thread([this] {
            server.run(stop, [this](const SessionSummary& s) { summaries.push_back(s); });
        });
    }
    ~RunningServer() {
        stop = true;
        thread.join();
    }
    Service service;
    Server server;
    std::atomic<bool> stop{false};
    std::vector<SessionSummary> summaries;
    std::thread thread;
};

// Raw-socket protocol client: framed writes, decoded reads.
std::vector<Json> read_messages(Client& c, protocol::FrameDecoder& dec, std::size_t want) {
    std::vector<Json> out;
    while (out.size() < want) {
        dec.feed(c.buffer);
        c.buffer.clear();
        while (auto p = dec.next()) out.push_back(Json::parse(*p));
        if (out.size() >= want) break;
        if (!c.read_more()) break;
    }
    return out;
}

std::string masked_ws_frame(std::uint8_t opcode, std::string_view payload) {
    std::string f;
    f.push_back(static_cast<char>(0x80 | opcode));
    const std::uint8_t mask[4] = {0x12, 0x34, 0x56, 0x78};
    if (payload.size() < 126) {
        f.push_back(static_cast<char>(0x80 | payload.size()));
    } else {
        f.push_back(static_cast<char>(0x80 | 126));
        f.push_back(static_cast<char>(payload.size() >> 8));
        f.push_back(static_cast<char>(payload.size() & 0xff));
    }
    for (auto m : mask) f.push_back(static_cast<char>(m));
    for (std::size_t i = 0; i < payload.size(); ++i) f.push_back(static_cast<char>(payload[i] ^ mask[i % 4]));
    return f;
}

// Parses unmasked server frames; returns (opcode, payload) pairs.
std::vector<std::pair<int, std::string>> parse_ws(std::string_view s) {
    std::vector<std::pair<int, std::string>> out;
    std::size_t pos = 0;
    while (pos + 2 <= s.size()) {
        const int op = static_cast<unsigned char>(s[pos]) & 0x0f;
        std::size_t len = static_cast<unsigned char>(s[pos + 1]) & 0x7f;
        std::size_t hdr = 2;
        if (len == 126) {
            len = (std::size_t(static_cast<unsigned char>(s[pos + 2])) << 8) | static_cast<unsigned char>(s[pos + 3]);
            hdr = 4;
        } else if (len == 127) {
            len = 0;
            for (int i = 0; i < 8; ++i) len = (len << 8) | static_cast<unsigned char>(s[pos + 2 + i]);
            hdr = 10;
        }
        if (pos + hdr + len > s.size()) break;
        out.emplace_back(op, std::string(s.substr(pos + hdr, len)));
        pos += hdr + len;
    }
    return out;
}

}  // namespace

TEST_SUITE("server") {

TEST_CASE("listen address parsing and accept key") {
    CHECK(parse_listen("127.0.0.1:8765") == std::pair<std::string, std::uint16_t>{"127.0.0.1", 8765});
    CHECK(parse_listen("0.0.0.0:0").second == 0);
    CHECK_THROWS_AS(parse_listen("localhost"), ConfigError);
    CHECK_THROWS_AS(parse_listen("a:99999"), ConfigError);
    CHECK_THROWS_AS(parse_listen("a:x1"), ConfigError);
    // Example handshake from the WebSocket standard.
    CHECK(websocket_accept("dGhlIHNhbXBsZSBub25jZQ==") == "s3pPLMBiTxaQ9kYGzzhZRbK+xOo=");
}

TEST_CASE("raw framed session over TCP") {
    RunningServer rs(testutil::transcript_config());
    Client c(rs.server.port());
    protocol::FrameDecoder dec;
    std::string bytes = protocol::frame_payload(protocol::dump(protocol::make_hello_request(Json::object())));
    for (int t = 0; t < 64; ++t) {
        bytes += protocol::frame_payload(protocol::dump(protocol::make_frame(t, std::vector<double>(8, 0.1 * t))));
    }
    bytes += protocol::frame_payload(protocol::dump(protocol::make_end()));
    c.send(bytes);
    const auto msgs = read_messages(c, dec, 8);
    REQUIRE(msgs.size() == 7);
    CHECK(msgs[0]["type"] == "hello");
    CHECK(msgs[1]["type"] == "joints");
    CHECK(msgs[1]["frames"].size() == 60);
    CHECK(msgs[3]["frames"].size() == 4);
    CHECK(msgs[5]["final"] == true);
    CHECK(msgs[5]["frames_in"] == 64);
    CHECK(msgs[6]["type"] == "end");
    CHECK_FALSE(c.read_more(2000));  // server closes after end
}

TEST_CASE("malformed framing gets an error and a close") {
    RunningServer rs(testutil::transcript_config());
    Client c(rs.server.port());
    c.send("xyz\n{}\n");
    const std::string all = c.read_all();
    CHECK(all.find("\"bad_message\"") != std::string::npos);
}

TEST_CASE("websocket handshake and masked frames") {
    RunningServer rs(testutil::transcript_config());
    Client c(rs.server.port());
    c.send("GET /ws HTTP/1.1\r\nHost: x\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
           "Sec-WebSocket-Key: dGhlIHNhbXBsZSBub25jZQ==\r\nSec-WebSocket-Version: 13\r\n\r\n");
    while (c.buffer.find("\r\n\r\n") == std::string::npos) REQUIRE(c.read_more());
    const std::size_t hdr_end = c.buffer.find("\r\n\r\n") + 4;
    const std::string head = c.buffer.substr(0, hdr_end);
    CHECK(head.rfind("HTTP/1.1 101", 0) == 0);
    CHECK(head.find("Sec-WebSocket-Accept: s3pPLMBiTxaQ9kYGzzhZRbK+xOo=") != std::string::npos);

    std::string out = masked_ws_frame(0x1, protocol::dump(protocol::make_hello_request(Json::object())));
    out += masked_ws_frame(0x9, "hi");
    for (int t = 0; t < 60; ++t) {
        out += masked_ws_frame(0x1, protocol::dump(protocol::make_frame(t, std::vector<double>(8, 0.0))));
    }
    out += masked_ws_frame(0x1, protocol::dump(protocol::make_end()));
    c.send(out);
    c.read_all();
    auto frames = parse_ws(std::string_view(c.buffer).substr(hdr_end));
    REQUIRE(frames.size() == 7);
    // The pong is written as soon as the ping is read, so its position
    // relative to the protocol replies is not fixed.
    const auto pong = std::find(frames.begin(), frames.end(), std::pair<int, std::string>{0xA, "hi"});
    REQUIRE(pong != frames.end());
    frames.erase(pong);
    for (std::size_t i = 0; i < 5; ++i) CHECK(frames[i].first == 0x1);
    CHECK(Json::parse(frames[0].second)["type"] == "hello");
    CHECK(Json::parse(frames[1].second)["type"] == "joints");
    CHECK(Json::parse(frames[2].second)["type"] == "stats");
    CHECK(Json::parse(frames[3].second)["final"] == true);
    CHECK(Json::parse(frames[4].second)["type"] == "end");
    CHECK(frames[5].first == 0x8);
}

TEST_CASE("static UI hosting and the demo clip") {
    const auto dir = std::filesystem::temp_directory_path() / "mstream_ui_test";
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "index.html") << "<html>viewer</html>";
    {
        RunningServer rs(testutil::transcript_config(), dir);
        Client a(rs.server.port());
        a.send("GET / HTTP/1.1\r\nHost: x\r\n\r\n");
        const std::string r = a.read_all();
        CHECK(r.rfind("HTTP/1.1 200", 0) == 0);
        CHECK(r.find("text/html") != std::string::npos);
        CHECK(r.find("<html>viewer</html>") != std::string::npos);
        Client b(rs.server.port());
        b.send("GET /missing.js HTTP/1.1\r\n\r\n");
        CHECK(b.read_all().rfind("HTTP/1.1 404", 0) == 0);
        Client d(rs.server.port());
        d.send("GET /../etc/passwd HTTP/1.1\r\n\r\n");
        CHECK(d.read_all().rfind("HTTP/1.1 400", 0) == 0);
        Client e(rs.server.port());
        e.send("GET /api/clip HTTP/1.1\r\n\r\n");
        const std::string clip = e.read_all();
        CHECK(clip.rfind("HTTP/1.1 200", 0) == 0);
        CHECK(clip.find("\"kind\":\"motion\",\"d\":263") != std::string::npos);
    }
    {
        RunningServer rs(testutil::transcript_config());
        Client a(rs.server.port());
        a.send("GET / HTTP/1.1\r\n\r\n");
        const std::string r = a.read_all();
        CHECK(r.rfind("HTTP/1.1 404", 0) == 0);
        CHECK(r.find("no UI configured") != std::string::npos);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("stop flag closes open sessions with final stats") {
    auto rs = std::make_unique<RunningServer>(testutil::transcript_config());
    Client c(rs->server.port());
    protocol::FrameDecoder dec;
    c.send(protocol::frame_payload(protocol::dump(protocol::make_hello_request(Json::object()))));
    c.send(protocol::frame_payload(protocol::dump(protocol::make_frame(0, std::vector<double>(8, 0.0)))));
    REQUIRE(read_messages(c, dec, 1).size() == 1);
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    rs->stop = true;
    const auto msgs = read_messages(c, dec, 2);
    REQUIRE(msgs.size() == 2);
    CHECK(msgs[0]["final"] == true);
    CHECK(msgs[0]["frames_in"] == 1);
    CHECK(msgs[1]["type"] == "end");
    rs.reset();
}

TEST_CASE("sessions on concurrent connections are isolated") {
    RunningServer rs(testutil::transcript_config());
    Client a(rs.server.port());
    Client b(rs.server.port());
    std::string bytes = protocol::frame_payload(protocol::dump(protocol::make_hello_request(Json::object())));
    for (int t = 0; t < 60; ++t) {
        bytes += protocol::frame_payload(protocol::dump(protocol::make_frame(t, std::vector<double>(8, 0.02 * t))));
    }
    a.send(bytes);
    b.send(bytes);
    protocol::FrameDecoder da;
    protocol::FrameDecoder db;
    const auto ma = read_messages(a, da, 2);
    const auto mb = read_messages(b, db, 2);
    REQUIRE(ma.size() >= 2);
    REQUIRE(mb.size() >= 2);
    CHECK(ma[0]["session"] != mb[0]["session"]);
    CHECK(ma[1]["type"] == "joints");
    CHECK(ma[1] == mb[1]);
}

TEST_CASE("bind failure is a config error") {
    RunningServer rs(testutil::transcript_config());
    Service svc(testutil::transcript_config());
    Server second(svc, ServerOptions{"127.0.0.1", rs.server.port(), {}});
    CHECK_THROWS_AS(second.bind(), ConfigError);
    Server bad_host(svc, ServerOptions{"not-a-host", 0, {}});
    CHECK_THROWS_AS(bad_host.bind(), ConfigError);
}

}  // TEST_SUITE
