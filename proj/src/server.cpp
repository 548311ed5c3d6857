#include "mstream/server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <openssl/evp.h>
#include <openssl/sha.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "mstream/errors.hpp"
#include "mstream/motion_io.hpp"
#include "mstream/synth.hpp"

namespace mstream {

namespace {

constexpr int kPollMs = 100;
constexpr std::size_t kMaxHttpHeader = 16 * 1024;

bool send_all(int fd, std::string_view bytes) {
    while (!bytes.empty()) {
        const ssize_t n = ::send(fd, bytes.data(), bytes.size(), MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        bytes.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
}

// Blocking read with a stop check. Returns bytes read, 0 on EOF, -1 on error,
// -2 on timeout.
ssize_t read_some(int fd, char* buf, std::size_t cap, int timeout_ms) {
    pollfd p{fd, POLLIN, 0};
    const int r = ::poll(&p, 1, timeout_ms);
    if (r == 0) return -2;
    if (r < 0) return errno == EINTR ? -2 : -1;
    const ssize_t n = ::recv(fd, buf, cap, 0);
    if (n < 0 && (errno == EINTR || errno == EAGAIN)) return -2;
    return n;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

struct HttpRequest {
    std::string method;
    std::string target;
    std::map<std::string, std::string> headers;  // lower-case names
};

HttpRequest parse_http(const std::string& head) {
    HttpRequest req;
    std::istringstream in(head);
    std::string line;
    std::getline(in, line);
    std::istringstream first(line);
    first >> req.method >> req.target;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) break;
        const auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        req.headers[lower(trim(line.substr(0, colon)))] = trim(line.substr(colon + 1));
    }
    return req;
}

std::string http_response(int status, const std::string& reason, const std::string& type, const std::string& body) {
    std::string r = "HTTP/1.1 " + std::to_string(status) + " " + reason + "\r\n";
    r += "Content-Type: " + type + "\r\n";
    r += "Content-Length: " + std::to_string(body.size()) + "\r\n";
    r += "Connection: close\r\n\r\n";
    r += body;
    return r;
}

std::string content_type(const std::filesystem::path& p) {
    const std::string ext = lower(p.extension().string());
    if (ext == ".html" || ext == ".htm") return "text/html; charset=utf-8";
    if (ext == ".js" || ext == ".mjs") return "text/javascript; charset=utf-8";
    if (ext == ".css") return "text/css; charset=utf-8";
    if (ext == ".json" || ext == ".map") return "application/json";
    if (ext == ".svg") return "image/svg+xml";
    if (ext == ".png") return "image/png";
    if (ext == ".wasm") return "application/wasm";
    return "application/octet-stream";
}

std::string serve_static(const std::filesystem::path& root, const HttpRequest& req) {
    if (req.method != "GET") return http_response(405, "Method Not Allowed", "text/plain", "GET only\n");
    std::string target = req.target.substr(0, req.target.find('?'));
    if (target == "/api/clip") {
        // Built-in demo clip in the motion text format.
        std::ostringstream out;
        write_motion(out, synth_motion(400, 263, 0));
        return http_response(200, "OK", "text/plain; charset=utf-8", out.str());
    }
    if (root.empty()) {
        return http_response(404, "Not Found", "text/plain", "no UI configured (start serve with --ui DIR)\n");
    }
    if (target.empty() || target.front() != '/' || target.find("..") != std::string::npos) {
        return http_response(400, "Bad Request", "text/plain", "bad path\n");
    }
    if (target.back() == '/') target += "index.html";
    const std::filesystem::path file = root / target.substr(1);
    std::ifstream in(file, std::ios::binary);
    if (!in || std::filesystem::is_directory(file)) {
        return http_response(404, "Not Found", "text/plain", "not found\n");
    }
    std::ostringstream body;
    body << in.rdbuf();
    return http_response(200, "OK", content_type(file), body.str());
}

std::string ws_frame(std::uint8_t opcode, std::string_view payload) {
    std::string f;
    f.push_back(static_cast<char>(0x80 | opcode));
    const std::size_t n = payload.size();
    if (n < 126) {
        f.push_back(static_cast<char>(n));
    } else if (n <= 0xffff) {
        f.push_back(126);
        f.push_back(static_cast<char>((n >> 8) & 0xff));
        f.push_back(static_cast<char>(n & 0xff));
    } else {
        f.push_back(127);
        for (int i = 7; i >= 0; --i) f.push_back(static_cast<char>((static_cast<std::uint64_t>(n) >> (8 * i)) & 0xff));
    }
    f.append(payload);
    return f;
}

// Incremental WebSocket frame parser for client->server frames.
class WsReader {
public:
    struct Frame {
        bool fin;
        std::uint8_t opcode;
        std::string payload;
    };

    void feed(std::string_view bytes) { buf_.append(bytes); }

    // Throws ProtocolError on protocol violations.
    std::optional<Frame> next() {
        if (buf_.size() < 2) return std::nullopt;
        const auto b0 = static_cast<std::uint8_t>(buf_[0]);
        const auto b1 = static_cast<std::uint8_t>(buf_[1]);
        const bool masked = b1 & 0x80;
        if (!masked) throw protocol::ProtocolError(protocol::code::bad_message, "client frames must be masked");
        std::uint64_t len = b1 & 0x7f;
        std::size_t pos = 2;
        if (len == 126) {
            if (buf_.size() < 4) return std::nullopt;
            len = (std::uint64_t(std::uint8_t(buf_[2])) << 8) | std::uint8_t(buf_[3]);
            pos = 4;
        } else if (len == 127) {
            if (buf_.size() < 10) return std::nullopt;
            len = 0;
            for (int i = 0; i < 8; ++i) len = (len << 8) | std::uint8_t(buf_[2 + i]);
            pos = 10;
        }
        if (len > protocol::kMaxPayload) {
            throw protocol::ProtocolError(protocol::code::bad_message, "payload exceeds size limit");
        }
        if (buf_.size() < pos + 4 + len) return std::nullopt;
        const char* mask = buf_.data() + pos;
        pos += 4;
        Frame f{(b0 & 0x80) != 0, static_cast<std::uint8_t>(b0 & 0x0f), buf_.substr(pos, len)};
        for (std::size_t i = 0; i < f.payload.size(); ++i) f.payload[i] ^= mask[i % 4];
        buf_.erase(0, pos + len);
        return f;
    }

private:
    std::string buf_;
};

}  // namespace

std::pair<std::string, std::uint16_t> parse_listen(const std::string& listen) {
    const auto colon = listen.rfind(':');
    if (colon == std::string::npos || colon == 0) {
        throw ConfigError("listen address must be host:port, got '" + listen + "'");
    }
    const std::string host = listen.substr(0, colon);
    const std::string port_text = listen.substr(colon + 1);
    unsigned port = 0;
    auto [p, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
    if (ec != std::errc() || p != port_text.data() + port_text.size() || port > 65535 || port_text.empty()) {
        throw ConfigError("listen port must be 0..65535, got '" + port_text + "'");
    }
    return {host, static_cast<std::uint16_t>(port)};
}

std::string websocket_accept(const std::string& key) {
    const std::string input = key + "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
    unsigned char digest[SHA_DIGEST_LENGTH];
    SHA1(reinterpret_cast<const unsigned char*>(input.data()), input.size(), digest);
    unsigned char out[4 * ((SHA_DIGEST_LENGTH + 2) / 3) + 1];
    const int n = EVP_EncodeBlock(out, digest, SHA_DIGEST_LENGTH);
    return std::string(reinterpret_cast<char*>(out), static_cast<std::size_t>(n));
}

Server::Server(Service& service, ServerOptions options) : service_(service), options_(std::move(options)) {}

Server::~Server() {
    for (auto& w : workers_) {
        if (w.joinable()) w.join();
    }
    if (listen_fd_ >= 0) ::close(listen_fd_);
}

void Server::bind() {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw ConfigError(std::string("socket: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(options_.port);
    const std::string host = options_.host == "localhost" ? "127.0.0.1" : options_.host;
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        throw ConfigError("listen host must be an IPv4 address, got '" + options_.host + "'");
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
        throw ConfigError("cannot bind " + options_.host + ":" + std::to_string(options_.port) + ": " +
                          std::strerror(errno));
    }
    if (::listen(listen_fd_, 16) < 0) throw ConfigError(std::string("listen: ") + std::strerror(errno));
    socklen_t len = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
}

void Server::report(const SessionSummary& s) {
    std::lock_guard lock(report_mu_);
    if (on_summary_) on_summary_(s);
}

void Server::run(const std::atomic<bool>& stop, SummaryFn on_summary) {
    if (listen_fd_ < 0) bind();
    on_summary_ = std::move(on_summary);
    while (!stop.load()) {
        pollfd p{listen_fd_, POLLIN, 0};
        const int r = ::poll(&p, 1, kPollMs);
        if (r <= 0) continue;
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) continue;
        int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
        workers_.emplace_back([this, fd, &stop] { serve_client(fd, stop); });
    }
    for (auto& w : workers_) w.join();
    workers_.clear();
}

void Server::serve_client(int fd, const std::atomic<bool>& stop) {
    char buf[64 * 1024];
    std::string pending;
    // Sniff the transport from the first bytes.
    while (pending.size() < 4 && !stop.load()) {
        const ssize_t n = read_some(fd, buf, sizeof(buf), kPollMs);
        if (n == -2) continue;
        if (n <= 0) {
            ::close(fd);
            return;
        }
        pending.append(buf, static_cast<std::size_t>(n));
    }
    if (stop.load() && pending.size() < 4) {
        ::close(fd);
        return;
    }

    bool websocket = false;
    if (pending.rfind("GET ", 0) == 0) {
        std::size_t end;
        while ((end = pending.find("\r\n\r\n")) == std::string::npos) {
            if (pending.size() > kMaxHttpHeader || stop.load()) {
                ::close(fd);
                return;
            }
            const ssize_t n = read_some(fd, buf, sizeof(buf), kPollMs);
            if (n == -2) continue;
            if (n <= 0) {
                ::close(fd);
                return;
            }
            pending.append(buf, static_cast<std::size_t>(n));
        }
        const HttpRequest req = parse_http(pending.substr(0, end + 2));
        pending.erase(0, end + 4);
        const auto up = req.headers.find("upgrade");
        const auto key = req.headers.find("sec-websocket-key");
        if (up != req.headers.end() && lower(up->second) == "websocket" && key != req.headers.end()) {
            send_all(fd, "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
                         "Sec-WebSocket-Accept: " +
                             websocket_accept(key->second) + "\r\n\r\n");
            websocket = true;
        } else {
            send_all(fd, serve_static(options_.ui_dir, req));
            ::close(fd);
            return;
        }
    }

    bool alive = true;
    Connection conn(service_, [&](const std::string& payload) {
        if (!alive) return;
        alive = send_all(fd, websocket ? ws_frame(0x1, payload) : protocol::frame_payload(payload));
    });
    protocol::FrameDecoder framed;
    WsReader ws;
    std::string fragments;
    bool peer_closed = false;

    // Splits raw bytes into payloads and queues them. False when the stream is
    // unusable (bad framing or a WebSocket close).
    auto ingest = [&](std::string_view bytes) -> bool {
        try {
            if (!websocket) {
                framed.feed(bytes);
                while (auto p = framed.next()) conn.enqueue(std::move(*p));
                return true;
            }
            ws.feed(bytes);
            while (auto f = ws.next()) {
                if (f->opcode == 0x8) {
                    send_all(fd, ws_frame(0x8, ""));
                    return false;
                }
                if (f->opcode == 0x9) {
                    send_all(fd, ws_frame(0xA, f->payload));
                    continue;
                }
                if (f->opcode == 0xA) continue;
                fragments += f->payload;
                if (f->fin) {
                    conn.enqueue(std::move(fragments));
                    fragments.clear();
                }
            }
            return true;
        } catch (const protocol::ProtocolError& e) {
            conn.pump();
            const std::string err = protocol::dump(protocol::make_error(e.code(), e.what()));
            send_all(fd, websocket ? ws_frame(0x1, err) : protocol::frame_payload(err));
            return false;
        }
    };

    bool usable = ingest(pending);
    while (usable && alive && !stop.load() && !conn.finished()) {
        // Drain whatever the socket already holds before each message so the
        // queue (and the reported queue_depth) reflects the backlog.
        while (conn.queue_depth() > 0 && usable) {
            const ssize_t n = read_some(fd, buf, sizeof(buf), 0);
            if (n > 0) {
                usable = ingest(std::string_view(buf, static_cast<std::size_t>(n)));
                continue;
            }
            if (n == 0 || n == -1) peer_closed = true;
            conn.pump_one();
            if (peer_closed || conn.finished()) break;
        }
        if (!usable || peer_closed || conn.finished()) break;
        const ssize_t n = read_some(fd, buf, sizeof(buf), kPollMs);
        if (n == -2) continue;
        if (n <= 0) {
            peer_closed = true;
            break;
        }
        usable = ingest(std::string_view(buf, static_cast<std::size_t>(n)));
    }
    conn.pump();
    if (peer_closed) alive = false;  // nobody is listening for final stats
    if (auto summary = conn.shutdown()) report(*summary);
    if (websocket && alive && !peer_closed) send_all(fd, ws_frame(0x8, ""));
    ::shutdown(fd, SHUT_WR);
    ::close(fd);
}

}  // namespace mstream
