#include "mstream/protocol.hpp"

#include <cmath>

namespace mstream::protocol {

std::string frame_payload(std::string_view payload) {
    if (payload.size() > kMaxPayload) throw ProtocolError(code::bad_message, "payload exceeds size limit");
    std::string out = std::to_string(payload.size());
    out.reserve(out.size() + payload.size() + 2);
    out += '\n';
    out += payload;
    out += '\n';
    return out;
}

void FrameDecoder::feed(std::string_view bytes) {
    if (pos_ > 0 && pos_ * 2 > buf_.size()) {
        buf_.erase(0, pos_);
        pos_ = 0;
    }
    buf_.append(bytes);
}

std::optional<std::string> FrameDecoder::next() {
    const std::size_t nl = buf_.find('\n', pos_);
    if (nl == std::string::npos) {
        if (buf_.size() - pos_ > 20) throw ProtocolError(code::bad_message, "length line too long");
        for (std::size_t i = pos_; i < buf_.size(); ++i) {
            if (buf_[i] < '0' || buf_[i] > '9') throw ProtocolError(code::bad_message, "length line is not a number");
        }
        return std::nullopt;
    }
    if (nl == pos_ || nl - pos_ > 20) throw ProtocolError(code::bad_message, "bad length line");
    std::size_t len = 0;
    for (std::size_t i = pos_; i < nl; ++i) {
        const char c = buf_[i];
        if (c < '0' || c > '9') throw ProtocolError(code::bad_message, "length line is not a number");
        len = len * 10 + static_cast<std::size_t>(c - '0');
        if (len > kMaxPayload) throw ProtocolError(code::bad_message, "payload exceeds size limit");
    }
    const std::size_t start = nl + 1;
    if (buf_.size() < start + len + 1) return std::nullopt;
    if (buf_[start + len] != '\n') throw ProtocolError(code::bad_message, "payload not terminated by newline");
    std::string payload = buf_.substr(start, len);
    pos_ = start + len + 1;
    return payload;
}

Json parse_message(std::string_view payload) {
    Json j;
    try {
        j = Json::parse(payload);
    } catch (const Json::parse_error&) {
        throw ProtocolError(code::bad_message, "payload is not valid JSON");
    }
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
        throw ProtocolError(code::bad_message, "message must be an object with a string 'type'");
    }
    return j;
}

std::string dump(const Json& message) { return message.dump(); }

Json make_hello_request(const Json& config) { return Json{{"type", "hello"}, {"config", config}}; }

Json make_frame(std::int64_t t, std::span<const double> values) {
    return Json{{"type", "frame"}, {"t", t}, {"values", std::vector<double>(values.begin(), values.end())}};
}

Json make_style_name(const std::string& name) { return Json{{"type", "style"}, {"name", name}}; }

Json make_style_vec(std::span<const double> vec) {
    return Json{{"type", "style"}, {"vec", std::vector<double>(vec.begin(), vec.end())}};
}

Json make_end() { return Json{{"type", "end"}}; }

FrameMsg read_frame(const Json& m) {
    FrameMsg f;
    if (!m.contains("t") || !m["t"].is_number_integer()) {
        throw ProtocolError(code::bad_frame, "frame.t must be an integer");
    }
    f.t = m["t"].get<std::int64_t>();
    if (!m.contains("values") || !m["values"].is_array()) {
        throw ProtocolError(code::bad_frame, "frame.values must be an array of numbers");
    }
    const auto& values = m["values"];
    f.values.reserve(values.size());
    for (const auto& v : values) {
        if (!v.is_number()) throw ProtocolError(code::bad_frame, "frame.values must be an array of numbers");
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw ProtocolError(code::bad_frame, "frame.values must be finite");
        f.values.push_back(x);
    }
    return f;
}

StyleMsg read_style(const Json& m) {
    StyleMsg s;
    const bool has_name = m.contains("name");
    const bool has_vec = m.contains("vec");
    if (has_name == has_vec) throw ProtocolError(code::bad_message, "style needs exactly one of name or vec");
    if (has_name) {
        if (!m["name"].is_string()) throw ProtocolError(code::bad_message, "style.name must be a string");
        s.name = m["name"].get<std::string>();
        return s;
    }
    if (!m["vec"].is_array()) throw ProtocolError(code::bad_style, "style.vec must be an array of numbers");
    std::vector<double> vec;
    for (const auto& v : m["vec"]) {
        if (!v.is_number()) throw ProtocolError(code::bad_style, "style.vec must be an array of numbers");
        vec.push_back(v.get<double>());
    }
    s.vec = std::move(vec);
    return s;
}

Json make_hello_reply(const std::string& session, const Json& config) {
    return Json{{"type", "hello"}, {"session", session}, {"config", config}};
}

Json make_joints(std::size_t t0, const JointSequence& joints) {
    Json frames = Json::array();
    const std::size_t J = joints.joint_count();
    for (std::size_t t = 0; t < joints.size(); ++t) {
        const auto f = joints.frame(t);
        Json frame = Json::array();
        for (std::size_t j = 0; j < J; ++j) frame.push_back(Json::array({f[3 * j], f[3 * j + 1], f[3 * j + 2]}));
        frames.push_back(std::move(frame));
    }
    return Json{{"type", "joints"}, {"t0", t0}, {"frames", std::move(frames)}};
}

Json make_error(const std::string& error_code, const std::string& detail) {
    return Json{{"type", "error"}, {"code", error_code}, {"detail", detail}};
}

}  // namespace mstream::protocol
