#include "mstream/service.hpp"

#include <chrono>

#include "mstream/errors.hpp"

namespace mstream {

using protocol::Json;
namespace code = protocol::code;

double SteadyClock::now_ms() {
    using namespace std::chrono;
    return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
}

std::unique_ptr<Clock> make_clock(const std::string& name) {
    if (name == "steady") return std::make_unique<SteadyClock>();
    if (name == "tick") return std::make_unique<TickClock>();
    throw ConfigError("unknown clock '" + name + "' (expected steady or tick)");
}

SessionConfig session_config_from_hello(const AppConfig& defaults, const nlohmann::json& hello) {
    SessionConfig c;
    c.backend = defaults.backend;
    c.pipeline = defaults.pipeline;
    c.styles = defaults.styles;
    c.style = defaults.default_style;
    c.base_dir = defaults.base_dir;
    if (hello.is_null()) return c;
    if (!hello.is_object()) throw ConfigError("hello.config must be an object");
    for (const auto& item : hello.items()) {
        if (item.key() != "backend" && item.key() != "pipeline" && item.key() != "style") {
            throw ConfigError("hello.config: unknown key '" + item.key() + "'");
        }
    }
    if (hello.contains("backend")) c.backend = backend_spec_from_json(hello["backend"], c.backend);
    if (hello.contains("pipeline")) c.pipeline = pipeline_from_json(hello["pipeline"], c.pipeline);
    if (hello.contains("style")) {
        if (!hello["style"].is_string()) throw ConfigError("hello.config.style must be a style name");
        c.style = hello["style"].get<std::string>();
    }
    return c;
}

Json session_config_to_json(const SessionConfig& config, const StyleCatalog& catalog) {
    Json styles = Json::array();
    for (const auto& s : catalog.styles) styles.push_back(s.label);
    return Json{{"backend", backend_spec_to_json(config.backend)},
                {"pipeline", pipeline_to_json(config.pipeline)},
                {"styles", std::move(styles)},
                {"style", catalog.default_style}};
}

Session::Session(std::string id, const SessionConfig& config)
    : id_(std::move(id)), config_(config), backend_(make_backend(config.backend)),
      jitter_(backend_->descriptor().joint_count) {
    catalog_ = build_catalog(config.styles, config.style, *backend_, config.base_dir);
    if (config_.pipeline.mode == PipelineMode::offline) {
        throw ConfigError("mode offline cannot stream; use proposed, naive, no_reencode or noncausal");
    }
    pipeline_ = std::make_unique<StreamingPipeline>(config_.pipeline, backend_, catalog_.default_embedding());
}

std::vector<StrideOutput> Session::push_frame(std::span<const double> values) {
    const std::size_t strides_before = pipeline_->strides();
    const std::size_t emitted_before = pipeline_->frames_emitted();
    const JointSequence joints = pipeline_->push_frame(values);
    std::vector<StrideOutput> out;
    std::size_t offset = 0;
    const auto& cfg = pipeline_->config();
    for (std::size_t k = strides_before; k < pipeline_->strides(); ++k) {
        const std::size_t n = k == 0 ? cfg.window : cfg.stride;
        out.push_back(StrideOutput{k, emitted_before + offset, joints.slice(offset, offset + n)});
        offset += n;
    }
    const std::size_t steady = pipeline_->steady_state_begin();
    for (std::size_t i = 0; i < joints.size(); ++i) {
        if (emitted_before + i >= steady) jitter_.add_frame(joints.frame(i));
    }
    return out;
}

void Session::set_style(const std::string& name) {
    const StyleEmbedding* s = catalog_.find(name);
    if (!s) throw ArgumentError("unknown style '" + name + "'");
    pipeline_->set_style(*s);
}

void Session::set_style_vec(std::vector<double> vec) {
    StyleEmbedding s{std::move(vec), "custom"};
    pipeline_->set_style(std::move(s));
}

void Session::record_latency(double stride_ms, double buffering_ms, double compute_ms) {
    latency_.add(stride_ms);
    buffering_.add(buffering_ms);
    compute_.add(compute_ms);
}

SessionSummary Session::summary() const {
    SessionSummary s;
    s.session = id_;
    s.frames_in = pipeline_->frames_received();
    s.frames_out = pipeline_->frames_emitted();
    s.strides = pipeline_->strides();
    s.mean_latency_ms = latency_.mean();
    s.max_latency_ms = latency_.max();
    s.mean_buffering_ms = buffering_.mean();
    s.mean_compute_ms = compute_.mean();
    const JitterTerms terms = jitter_.terms();
    if (terms.n_count > 0) s.jitter = terms.d_sum / static_cast<double>(terms.n_count);
    return s;
}

Json summary_to_json(const SessionSummary& s) {
    Json j{{"type", "stats"},
           {"final", true},
           {"session", s.session},
           {"frames_in", s.frames_in},
           {"frames_out", s.frames_out},
           {"strides", s.strides},
           {"mean_latency_ms", s.mean_latency_ms},
           {"max_latency_ms", s.max_latency_ms},
           {"mean_buffering_ms", s.mean_buffering_ms},
           {"mean_compute_ms", s.mean_compute_ms}};
    j["jitter"] = s.jitter ? Json(*s.jitter) : Json(nullptr);
    return j;
}

Service::Service(AppConfig defaults, std::shared_ptr<Clock> clock)
    : defaults_(std::move(defaults)),
      clock_(clock ? std::move(clock) : std::shared_ptr<Clock>(make_clock(defaults_.clock))) {}

std::string Service::open_session(const SessionConfig& config) {
    std::string id;
    {
        std::lock_guard lock(mu_);
        id = "s" + std::to_string(next_id_++);
    }
    // Built outside the registry lock; construction may be slow.
    auto slot = std::make_shared<Slot>();
    slot->session = std::make_unique<Session>(id, config);
    std::lock_guard lock(mu_);
    sessions_.emplace(id, std::move(slot));
    return id;
}

void Service::with_session(const std::string& id, const std::function<void(Session&)>& fn) {
    std::shared_ptr<Slot> slot;
    {
        std::lock_guard lock(mu_);
        auto it = sessions_.find(id);
        if (it == sessions_.end()) throw ArgumentError("unknown session '" + id + "'");
        slot = it->second;
    }
    std::lock_guard lock(slot->mu);
    fn(*slot->session);
}

SessionSummary Service::close_session(const std::string& id) {
    std::shared_ptr<Slot> slot;
    {
        std::lock_guard lock(mu_);
        auto it = sessions_.find(id);
        if (it == sessions_.end()) throw ArgumentError("unknown or already closed session '" + id + "'");
        slot = std::move(it->second);
        sessions_.erase(it);
    }
    std::lock_guard lock(slot->mu);
    return slot->session->summary();
}

std::vector<std::string> Service::open_sessions() const {
    std::lock_guard lock(mu_);
    std::vector<std::string> ids;
    for (const auto& [id, slot] : sessions_) ids.push_back(id);
    return ids;
}

Connection::Connection(Service& service, Sink sink) : service_(service), sink_(std::move(sink)) {}

Connection::~Connection() {
    if (session_) {
        try {
            service_.close_session(*session_);
        } catch (...) {
        }
    }
}

void Connection::enqueue(std::string payload) {
    inbox_.push_back(Incoming{std::move(payload), service_.clock().now_ms()});
}

bool Connection::pump_one() {
    if (inbox_.empty()) return false;
    Incoming in = std::move(inbox_.front());
    inbox_.pop_front();
    handle(in);
    return true;
}

std::size_t Connection::pump() {
    std::size_t n = 0;
    while (pump_one()) ++n;
    return n;
}

void Connection::send(const Json& m) { sink_(protocol::dump(m)); }

void Connection::send_error(const std::string& error_code, const std::string& detail) {
    send(protocol::make_error(error_code, detail));
}

void Connection::handle(const Incoming& in) {
    Json m;
    try {
        m = protocol::parse_message(in.payload);
    } catch (const protocol::ProtocolError& e) {
        send_error(e.code(), e.what());
        return;
    }
    const std::string type = m["type"].get<std::string>();
    if (ended_) {
        send_error(code::session_closed, "session already ended");
        return;
    }
    try {
        if (type == "hello") {
            on_hello(m);
        } else if (type == "frame" || type == "style" || type == "end") {
            if (!session_) {
                send_error(code::no_session, "send hello first");
                return;
            }
            if (type == "frame") on_frame(m, in.arrival_ms);
            else if (type == "style") on_style(m);
            else on_end();
        } else {
            send_error(code::bad_message, "unknown message type '" + type + "'");
        }
    } catch (const protocol::ProtocolError& e) {
        send_error(e.code(), e.what());
    } catch (const Error& e) {
        send_error(code::internal, e.what());
    }
}

void Connection::on_hello(const Json& m) {
    if (session_) {
        send_error(code::session_open, "session " + *session_ + " is already open");
        return;
    }
    SessionConfig config;
    std::string id;
    try {
        const nlohmann::json requested =
            m.contains("config") ? nlohmann::json::parse(m["config"].dump()) : nlohmann::json();
        config = session_config_from_hello(service_.defaults(), requested);
        id = service_.open_session(config);
    } catch (const ConfigError& e) {
        const std::string detail = e.what();
        send_error(detail.rfind("unknown backend", 0) == 0 ? code::unknown_backend : code::bad_config, detail);
        return;
    } catch (const Error& e) {
        send_error(code::bad_config, e.what());
        return;
    }
    session_ = id;
    Json reply;
    service_.with_session(id, [&](Session& s) {
        Json cfg = session_config_to_json(s.config(), s.catalog());
        const auto& desc = s.pipeline().backend().descriptor();
        cfg["frame_width"] = desc.frame_width;
        cfg["joint_count"] = desc.joint_count;
        cfg["style_dim"] = desc.style_dim;
        reply = protocol::make_hello_reply(id, cfg);
    });
    send(reply);
}

void Connection::on_frame(const Json& m, double arrival_ms) {
    const protocol::FrameMsg f = protocol::read_frame(m);
    if (last_t_ && f.t <= *last_t_) {
        throw protocol::ProtocolError(code::bad_frame, "frame.t must increase strictly (got " + std::to_string(f.t) +
                                                           " after " + std::to_string(*last_t_) + ")");
    }
    std::vector<StrideOutput> outputs;
    double compute_ms = 0.0;
    std::size_t buffer_len = 0;
    service_.with_session(*session_, [&](Session& s) {
        if (f.values.size() != s.frame_width()) {
            throw protocol::ProtocolError(code::bad_frame, "frame has " + std::to_string(f.values.size()) +
                                                               " values, session expects " +
                                                               std::to_string(s.frame_width()));
        }
        const double start = service_.clock().now_ms();
        outputs = s.push_frame(f.values);
        compute_ms = service_.clock().now_ms() - start;
        buffer_len = s.pipeline().buffer().size();
    });
    last_t_ = f.t;
    if (stride_open_ms_ < 0.0) stride_open_ms_ = arrival_ms;
    for (const auto& out : outputs) {
        send(protocol::make_joints(out.t0, out.joints));
        const double emit_ms = service_.clock().now_ms();
        const double latency = emit_ms - arrival_ms;
        const double buffering = arrival_ms - stride_open_ms_;
        service_.with_session(*session_, [&](Session& s) { s.record_latency(latency, buffering, compute_ms); });
        send(Json{{"type", "stats"},
                  {"stride", out.stride},
                  {"stride_latency_ms", latency},
                  {"compute_ms", compute_ms},
                  {"buffering_ms", buffering},
                  {"emitted", out.t0 + out.joints.size()},
                  {"buffer_len", buffer_len},
                  {"queue_depth", inbox_.size()}});
        stride_open_ms_ = -1.0;
    }
}

void Connection::on_style(const Json& m) {
    const protocol::StyleMsg msg = protocol::read_style(m);
    Json ack;
    service_.with_session(*session_, [&](Session& s) {
        try {
            if (msg.name) s.set_style(*msg.name);
            else s.set_style_vec(*msg.vec);
        } catch (const ArgumentError& e) {
            throw protocol::ProtocolError(msg.name ? code::unknown_style : code::bad_style, e.what());
        } catch (const DimensionError& e) {
            throw protocol::ProtocolError(code::bad_style, e.what());
        }
        ack = Json{{"type", "stats"},
                   {"ack", "style"},
                   {"style", s.style_label()},
                   {"effective_stride", s.pipeline().strides()}};
    });
    send(ack);
}

SessionSummary Connection::close_and_report() {
    SessionSummary summary = service_.close_session(*session_);
    session_.reset();
    ended_ = true;
    finished_ = true;
    send(summary_to_json(summary));
    send(protocol::make_end());
    return summary;
}

void Connection::on_end() { close_and_report(); }

std::optional<SessionSummary> Connection::shutdown() {
    if (!session_) {
        finished_ = true;
        return std::nullopt;
    }
    return close_and_report();
}

MemoryTransport::MemoryTransport(Service& service)
    : conn_(service, [this](const std::string& payload) { to_client_ += protocol::frame_payload(payload); }) {}

void MemoryTransport::client_send(const protocol::Json& message) {
    client_send_bytes(protocol::frame_payload(protocol::dump(message)));
}

void MemoryTransport::client_send_bytes(std::string_view bytes) {
    server_decoder_.feed(bytes);
    while (auto payload = server_decoder_.next()) {
        conn_.enqueue(std::move(*payload));
        conn_.pump();
    }
}

std::vector<std::string> MemoryTransport::client_receive() {
    client_decoder_.feed(to_client_);
    to_client_.clear();
    std::vector<std::string> out;
    while (auto payload = client_decoder_.next()) out.push_back(std::move(*payload));
    return out;
}

}  // namespace mstream
