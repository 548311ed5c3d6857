#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mstream/motion.hpp"

namespace mstream::protocol {

using Json = nlohmann::ordered_json;

// Byte framing for stream transports: "<decimal byte length>\n<payload>\n".
// The payload is one compact UTF-8 JSON object whose first key is "type".
// Over a WebSocket each text message carries one bare payload instead.
inline constexpr std::size_t kMaxPayload = 16u << 20;

std::string frame_payload(std::string_view payload);

// Incremental decoder; tolerates arbitrary chunking of the byte stream.
// A malformed length line poisons the stream (ProtocolError) because message
// boundaries can no longer be recovered.
class FrameDecoder {
public:
    void feed(std::string_view bytes);
    // Next complete payload, if any.
    std::optional<std::string> next();
    std::size_t buffered() const noexcept { return buf_.size() - pos_; }

private:
    std::string buf_;
    std::size_t pos_ = 0;
};

class ProtocolError : public std::runtime_error {
public:
    ProtocolError(std::string code, const std::string& detail)
        : std::runtime_error(detail), code_(std::move(code)) {}
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

// Error codes carried by error{code, detail}.
namespace code {
inline constexpr const char* bad_message = "bad_message";   // not JSON, no type, unknown type
inline constexpr const char* bad_frame = "bad_frame";       // frame with bad t, width or values
inline constexpr const char* bad_config = "bad_config";     // hello config rejected
inline constexpr const char* unknown_backend = "unknown_backend";
inline constexpr const char* unknown_style = "unknown_style";
inline constexpr const char* bad_style = "bad_style";       // raw style vector of the wrong size
inline constexpr const char* no_session = "no_session";     // message before hello
inline constexpr const char* session_open = "session_open"; // second hello
inline constexpr const char* session_closed = "session_closed";
inline constexpr const char* internal = "internal";
}  // namespace code

// Parses a payload and checks it is an object with a string "type".
Json parse_message(std::string_view payload);
std::string dump(const Json& message);

// Client -> server.
struct FrameMsg {
    std::int64_t t = 0;
    std::vector<double> values;
};
struct StyleMsg {
    std::optional<std::string> name;
    std::optional<std::vector<double>> vec;
};

Json make_hello_request(const Json& config);
Json make_frame(std::int64_t t, std::span<const double> values);
Json make_style_name(const std::string& name);
Json make_style_vec(std::span<const double> vec);
Json make_end();

FrameMsg read_frame(const Json& message);  // ProtocolError(bad_frame)
StyleMsg read_style(const Json& message);  // ProtocolError(bad_message)

// Server -> client.
Json make_hello_reply(const std::string& session, const Json& config);
// frames: T x J x 3 nested arrays.
Json make_joints(std::size_t t0, const JointSequence& joints);
Json make_error(const std::string& error_code, const std::string& detail);

}  // namespace mstream::protocol
