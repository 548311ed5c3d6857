#include "mstream/motion_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mstream/errors.hpp"

namespace mstream {

namespace {

using nlohmann::ordered_json;

std::vector<double> parse_row(std::string_view line, std::size_t expected, std::size_t line_no) {
    std::vector<double> values;
    values.reserve(expected);
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (true) {
        while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
        if (p == end) break;
        double v = 0.0;
        auto [next, ec] = std::from_chars(p, end, v);
        if (ec != std::errc() || (next < end && *next != ' ' && *next != '\t' && *next != '\r')) {
            const char* stop = p;
            while (stop < end && *stop != ' ' && *stop != '\t') ++stop;
            throw DataError("cannot parse number '" + std::string(p, stop) + "'", line_no);
        }
        if (!std::isfinite(v)) throw DataError("non-finite number", line_no);
        values.push_back(v);
        p = next;
    }
    if (values.size() != expected) {
        throw DataError("expected " + std::to_string(expected) + " numbers, found " + std::to_string(values.size()),
                        line_no);
    }
    return values;
}

ordered_json read_header(std::istream& in, std::string_view kind) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("missing header line", 1);
    ordered_json header;
    try {
        header = ordered_json::parse(line);
    } catch (const ordered_json::parse_error& e) {
        throw DataError(std::string("header is not valid JSON: ") + e.what(), 1);
    }
    if (!header.is_object()) throw DataError("header must be a JSON object", 1);
    const std::string got = header.value("kind", std::string());
    if (got != kind) throw DataError("header kind '" + got + "', expected '" + std::string(kind) + "'", 1);
    return header;
}

std::size_t header_count(const ordered_json& header, const char* key, bool required = true,
                         std::size_t fallback = 0) {
    if (!header.contains(key)) {
        if (required) throw DataError(std::string("header is missing '") + key + "'", 1);
        return fallback;
    }
    const auto& v = header[key];
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
        throw DataError(std::string("header field '") + key + "' must be a non-negative integer", 1);
    }
    return v.get<std::size_t>();
}

double header_fps(const ordered_json& header) {
    if (!header.contains("fps")) return kDefaultFps;
    if (!header["fps"].is_number()) throw DataError("header field 'fps' must be a number", 1);
    const double fps = header["fps"].get<double>();
    if (!(fps > 0.0) || !std::isfinite(fps)) throw DataError("header field 'fps' must be positive", 1);
    return fps;
}

void write_row(std::ostream& out, std::span<const double> row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out << ' ';
        out << format_number(row[i]);
    }
    out << '\n';
}

template <typename Fn>
std::size_t read_rows(std::istream& in, std::size_t expected_rows, std::size_t width, Fn&& on_row) {
    std::string line;
    std::size_t line_no = 1;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (rows == expected_rows) {
            throw DataError("more frame rows than frame_count=" + std::to_string(expected_rows), line_no);
        }
        on_row(parse_row(line, width, line_no));
        ++rows;
    }
    if (rows != expected_rows) {
        throw DataError("header frame_count=" + std::to_string(expected_rows) + " but file has " +
                            std::to_string(rows) + " frame rows",
                        line_no);
    }
    return rows;
}

}  // namespace

std::string format_number(double value) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc()) throw DataError("cannot format number");
    return std::string(buf, end);
}

void write_motion(std::ostream& out, const MotionSequence& motion, std::size_t joint_count) {
    ordered_json header{{"kind", "motion"},
                        {"d", motion.width()},
                        {"fps", motion.fps()},
                        {"joint_count", joint_count},
                        {"frame_count", motion.size()}};
    out << header.dump() << '\n';
    for (std::size_t t = 0; t < motion.size(); ++t) write_row(out, motion.frame(t));
}

MotionFile read_motion(std::istream& in) {
    const auto header = read_header(in, "motion");
    const std::size_t d = header_count(header, "d");
    const std::size_t frames = header_count(header, "frame_count");
    const std::size_t joints = header_count(header, "joint_count", false, kDefaultJointCount);
    if (d < kMinFrameWidth) throw DataError("header d must be >= 4", 1);
    MotionSequence motion(d, header_fps(header));
    motion.reserve(frames);
    read_rows(in, frames, d, [&](const std::vector<double>& row) { motion.append(row); });
    return MotionFile{std::move(motion), joints};
}

void write_joints(std::ostream& out, const JointSequence& joints, std::size_t warmup_frames) {
    ordered_json header{{"kind", "joints"},
                        {"joint_count", joints.joint_count()},
                        {"fps", joints.fps()},
                        {"frame_count", joints.size()},
                        {"warmup_frames", warmup_frames}};
    out << header.dump() << '\n';
    for (std::size_t t = 0; t < joints.size(); ++t) write_row(out, joints.frame(t));
}

JointsFile read_joints(std::istream& in) {
    const auto header = read_header(in, "joints");
    const std::size_t joint_count = header_count(header, "joint_count");
    const std::size_t frames = header_count(header, "frame_count");
    const std::size_t warmup = header_count(header, "warmup_frames", false, 0);
    if (joint_count == 0) throw DataError("header joint_count must be positive", 1);
    JointSequence joints(joint_count, header_fps(header));
    read_rows(in, frames, 3 * joint_count, [&](const std::vector<double>& row) { joints.append(row); });
    if (warmup > frames) throw DataError("warmup_frames exceeds frame_count", 1);
    return JointsFile{std::move(joints), warmup};
}

void write_motion_file(const std::filesystem::path& path, const MotionSequence& motion, std::size_t joint_count) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    write_motion(out, motion, joint_count);
}

MotionFile read_motion_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    try {
        return read_motion(in);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_joints_file(const std::filesystem::path& path, const JointSequence& joints, std::size_t warmup_frames) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    write_joints(out, joints, warmup_frames);
}

JointsFile read_joints_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    try {
        return read_joints(in);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

}  // namespace mstream
