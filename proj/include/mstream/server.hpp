#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "mstream/service.hpp"

namespace mstream {

struct ServerOptions {
    std::string host = "127.0.0.1";
    std::uint16_t port = 8765;  // 0 picks a free port
    std::filesystem::path ui_dir;  // static files served over HTTP when set
};

// "host:port" -> (host, port). ConfigError on malformed input.
std::pair<std::string, std::uint16_t> parse_listen(const std::string& listen);

// Sec-WebSocket-Accept value for a client key.
std::string websocket_accept(const std::string& key);

// One listening TCP socket. Each accepted client gets its own thread and one
// Connection. The first bytes select the transport:
//   "GET " with Upgrade: websocket  -> protocol over WebSocket text messages
//   other "GET "                    -> static file from ui_dir (or 404)
//   anything else                   -> length-framed protocol on the raw stream
class Server {
public:
    using SummaryFn = std::function<void(const SessionSummary&)>;

    Server(Service& service, ServerOptions options);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    // Binds and listens. ConfigError when the address is unusable.
    void bind();
    std::uint16_t port() const noexcept { return port_; }

    // Accepts clients until `stop` becomes true, then shuts every open
    // session down (final stats + end to each client) and joins the workers.
    void run(const std::atomic<bool>& stop, SummaryFn on_summary = nullptr);

private:
    void serve_client(int fd, const std::atomic<bool>& stop);
    void report(const SessionSummary& s);

    Service& service_;
    ServerOptions options_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::mutex report_mu_;
    SummaryFn on_summary_;
    std::vector<std::thread> workers_;
};

}  // namespace mstream
