#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "mstream/config.hpp"
#include "mstream/latency.hpp"
#include "mstream/metrics.hpp"
#include "mstream/pipeline.hpp"
#include "mstream/protocol.hpp"

namespace mstream {

// Millisecond clock. Injectable so transcripts can be made deterministic.
class Clock {
public:
    virtual ~Clock() = default;
    virtual double now_ms() = 0;
};

class SteadyClock final : public Clock {
public:
    double now_ms() override;
};

// Advances by `step` ms on every reading.
class TickClock final : public Clock {
public:
    explicit TickClock(double step = 1.0) : step_(step) {}
    double now_ms() override {
        std::lock_guard lock(mu_);
        now_ += step_;
        return now_;
    }

private:
    std::mutex mu_;
    double step_;
    double now_ = 0.0;
};

std::unique_ptr<Clock> make_clock(const std::string& name);

// Resolved session parameters.
struct SessionConfig {
    BackendSpec backend;
    PipelineConfig pipeline;
    std::vector<StyleSpec> styles = builtin_styles();
    std::string style;  // initial style; empty = catalog default
    std::filesystem::path base_dir;
};

// Session config from service defaults overlaid with a hello config object:
//   {"backend":{...}, "pipeline":{...}, "style":"name"}
SessionConfig session_config_from_hello(const AppConfig& defaults, const nlohmann::json& hello_config);
protocol::Json session_config_to_json(const SessionConfig& config, const StyleCatalog& catalog);

struct SessionSummary {
    std::string session;
    std::size_t frames_in = 0;
    std::size_t frames_out = 0;
    std::size_t strides = 0;
    double mean_latency_ms = 0.0;
    double max_latency_ms = 0.0;
    double mean_buffering_ms = 0.0;
    double mean_compute_ms = 0.0;
    std::optional<double> jitter;  // pooled, post-warm-up frames only; empty if undefined
};

// One stride's output as seen by a session.
struct StrideOutput {
    std::size_t stride = 0;
    std::size_t t0 = 0;  // processing-timeline index of the first joint frame
    JointSequence joints;
};

// One pipeline plus its style catalog and bookkeeping. Single owner.
class Session {
public:
    Session(std::string id, const SessionConfig& config);

    const std::string& id() const noexcept { return id_; }
    const SessionConfig& config() const noexcept { return config_; }
    const StyleCatalog& catalog() const noexcept { return catalog_; }
    const StreamingPipeline& pipeline() const noexcept { return *pipeline_; }
    std::size_t frame_width() const noexcept { return pipeline_->backend().descriptor().frame_width; }

    // Throws DimensionError on a width mismatch (session unaffected).
    std::vector<StrideOutput> push_frame(std::span<const double> values);
    // Throw ArgumentError (unknown name) / DimensionError (wrong size); style unchanged on error.
    void set_style(const std::string& name);
    void set_style_vec(std::vector<double> vec);
    const std::string& style_label() const noexcept { return pipeline_->style().label; }

    void record_latency(double stride_ms, double buffering_ms, double compute_ms);
    SessionSummary summary() const;

private:
    std::string id_;
    SessionConfig config_;
    std::shared_ptr<const Backend> backend_;
    StyleCatalog catalog_;
    std::unique_ptr<StreamingPipeline> pipeline_;
    JitterAccumulator jitter_;
    LatencyStats latency_;
    LatencyStats buffering_;
    LatencyStats compute_;
};

// Session registry. Sessions share no mutable state; the registry itself is
// guarded so connections on different threads can open and close sessions.
class Service {
public:
    explicit Service(AppConfig defaults, std::shared_ptr<Clock> clock = nullptr);

    const AppConfig& defaults() const noexcept { return defaults_; }
    Clock& clock() noexcept { return *clock_; }

    // Returns the new session id ("s1", "s2", ...). ConfigError on invalid config.
    std::string open_session(const SessionConfig& config);
    // Runs `fn` with exclusive access to the session. ArgumentError if unknown.
    void with_session(const std::string& id, const std::function<void(Session&)>& fn);
    // Removes the session and returns its summary. ArgumentError if unknown or
    // already closed.
    SessionSummary close_session(const std::string& id);
    std::vector<std::string> open_sessions() const;

private:
    struct Slot {
        std::mutex mu;
        std::unique_ptr<Session> session;
    };
    AppConfig defaults_;
    std::shared_ptr<Clock> clock_;
    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<Slot>> sessions_;
    std::uint64_t next_id_ = 1;
};

protocol::Json summary_to_json(const SessionSummary& s);

// Protocol endpoint for one client. Incoming payloads are queued with their
// arrival time and handled in order by pump(); replies go to the sink as
// bare JSON payloads (the transport adds framing). Not thread-safe: enqueue
// and pump from one thread, or guard externally.
class Connection {
public:
    using Sink = std::function<void(const std::string& payload)>;

    Connection(Service& service, Sink sink);
    ~Connection();

    void enqueue(std::string payload);
    std::size_t queue_depth() const noexcept { return inbox_.size(); }
    // Handles every queued message. Returns the number handled.
    std::size_t pump();
    // Handles at most one queued message.
    bool pump_one();

    // Transport lost or server shutting down: closes an open session and
    // sends final stats + end. Returns its summary, if a session was open.
    std::optional<SessionSummary> shutdown();
    bool session_open() const noexcept { return session_.has_value(); }
    bool finished() const noexcept { return finished_; }

private:
    struct Incoming {
        std::string payload;
        double arrival_ms;
    };
    void handle(const Incoming& in);
    void on_hello(const protocol::Json& m);
    void on_frame(const protocol::Json& m, double arrival_ms);
    void on_style(const protocol::Json& m);
    void on_end();
    void send(const protocol::Json& m);
    void send_error(const std::string& code, const std::string& detail);
    SessionSummary close_and_report();

    Service& service_;
    Sink sink_;
    std::deque<Incoming> inbox_;
    std::optional<std::string> session_;
    bool ended_ = false;
    bool finished_ = false;
    std::optional<std::int64_t> last_t_;
    double stride_open_ms_ = -1.0;  // arrival of the first frame feeding the pending stride
};

// Byte-level in-memory transport: framing on both directions, the service
// side pumped synchronously after every client write.
class MemoryTransport {
public:
    explicit MemoryTransport(Service& service);

    void client_send(const protocol::Json& message);
    // Raw bytes, for framing tests.
    void client_send_bytes(std::string_view bytes);
    // Complete server payloads received so far, in order.
    std::vector<std::string> client_receive();
    Connection& connection() noexcept { return conn_; }

private:
    std::string to_client_;
    protocol::FrameDecoder client_decoder_;
    protocol::FrameDecoder server_decoder_;
    Connection conn_;
};

}  // namespace mstream
