#include "mstream/motion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mstream/errors.hpp"

namespace mstream {

namespace {

void check_width(std::size_t width) {
    if (width < kMinFrameWidth) {
        throw DimensionError("frame width " + std::to_string(width) +
                             " is below the minimum of 4 (3 trajectory dims + 1 feature)");
    }
}

void check_finite(std::span<const double> values) {
    for (double v : values) {
        if (!std::isfinite(v)) throw ArgumentError("non-finite value in motion data");
    }
}

}  // namespace

MotionSequence::MotionSequence(std::size_t width, double fps) : width_(width), fps_(fps) {
    check_width(width);
    if (!(fps > 0.0) || !std::isfinite(fps)) throw ArgumentError("fps must be positive");
}

MotionSequence::MotionSequence(std::size_t width, std::vector<double> data, double fps)
    : MotionSequence(width, fps) {
    if (data.size() % width != 0) {
        throw DimensionError("motion data length " + std::to_string(data.size()) +
                             " is not a multiple of width " + std::to_string(width));
    }
    check_finite(data);
    data_ = std::move(data);
}

MotionSequence MotionSequence::from_rows(const std::vector<std::vector<double>>& rows, double fps) {
    if (rows.empty()) throw ArgumentError("from_rows needs at least one row to infer the width");
    MotionSequence seq(rows.front().size(), fps);
    seq.reserve(rows.size());
    for (const auto& row : rows) seq.append(row);
    return seq;
}

std::span<const double> MotionSequence::frame(std::size_t t) const {
    if (t >= size()) {
        throw BoundsError("frame " + std::to_string(t) + " out of range (size " +
                          std::to_string(size()) + ")");
    }
    return std::span<const double>(data_).subspan(t * width_, width_);
}

void MotionSequence::append(std::span<const double> frame) {
    if (frame.size() != width_) {
        throw DimensionError("frame width " + std::to_string(frame.size()) + " != sequence width " +
                             std::to_string(width_));
    }
    check_finite(frame);
    data_.insert(data_.end(), frame.begin(), frame.end());
}

void MotionSequence::append(const MotionSequence& other) {
    if (other.width_ != width_) {
        throw DimensionError("cannot append width " + std::to_string(other.width_) + " to width " +
                             std::to_string(width_));
    }
    data_.insert(data_.end(), other.data_.begin(), other.data_.end());
}

MotionSequence MotionSequence::slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > size()) {
        throw BoundsError("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                          ") out of range (size " + std::to_string(size()) + ")");
    }
    MotionSequence out(width_, fps_);
    out.data_.assign(data_.begin() + static_cast<std::ptrdiff_t>(begin * width_),
                     data_.begin() + static_cast<std::ptrdiff_t>(end * width_));
    return out;
}

JointSequence::JointSequence(std::size_t joint_count, double fps)
    : joint_count_(joint_count), fps_(fps) {
    if (joint_count == 0) throw DimensionError("joint count must be positive");
}

JointSequence::JointSequence(std::size_t joint_count, std::vector<double> data, double fps)
    : JointSequence(joint_count, fps) {
    if (data.size() % (3 * joint_count) != 0) {
        throw DimensionError("joint data length is not a multiple of 3 * joint_count");
    }
    data_ = std::move(data);
}

std::span<const double> JointSequence::frame(std::size_t t) const {
    if (t >= size()) {
        throw BoundsError("joint frame " + std::to_string(t) + " out of range (size " +
                          std::to_string(size()) + ")");
    }
    const std::size_t stride = 3 * joint_count_;
    return std::span<const double>(data_).subspan(t * stride, stride);
}

std::array<double, 3> JointSequence::joint(std::size_t t, std::size_t j) const {
    if (j >= joint_count_) throw BoundsError("joint index out of range");
    const auto f = frame(t);
    return {f[3 * j], f[3 * j + 1], f[3 * j + 2]};
}

void JointSequence::append(std::span<const double> frame) {
    if (frame.size() != 3 * joint_count_) {
        throw DimensionError("joint frame has " + std::to_string(frame.size()) + " values, expected " +
                             std::to_string(3 * joint_count_));
    }
    data_.insert(data_.end(), frame.begin(), frame.end());
}

void JointSequence::append(const JointSequence& other) {
    if (other.joint_count_ != joint_count_) throw DimensionError("joint count mismatch in append");
    data_.insert(data_.end(), other.data_.begin(), other.data_.end());
}

JointSequence JointSequence::slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > size()) throw BoundsError("joint slice out of range");
    const std::size_t stride = 3 * joint_count_;
    JointSequence out(joint_count_, fps_);
    out.data_.assign(data_.begin() + static_cast<std::ptrdiff_t>(begin * stride),
                     data_.begin() + static_cast<std::ptrdiff_t>(end * stride));
    return out;
}

FrameParts decompose(std::span<const double> frame) {
    check_width(frame.size());
    FrameParts parts;
    std::copy_n(frame.begin(), kTrajectoryDims, parts.traj.begin());
    parts.feat.assign(frame.begin() + kTrajectoryDims, frame.end());
    return parts;
}

std::vector<double> recompose(const FrameParts& parts) {
    std::vector<double> frame(parts.traj.begin(), parts.traj.end());
    frame.insert(frame.end(), parts.feat.begin(), parts.feat.end());
    return frame;
}

void copy_trajectory_into(std::span<double> target_frame, std::span<const double> source_frame) {
    if (target_frame.size() < kTrajectoryDims || source_frame.size() < kTrajectoryDims) {
        throw DimensionError("frame too narrow for a trajectory");
    }
    std::copy_n(source_frame.begin(), kTrajectoryDims, target_frame.begin());
}

MotionSequence copy_trajectory(const MotionSequence& target, const MotionSequence& source,
                               FrameRange range) {
    if (target.width() != source.width()) {
        throw DimensionError("copy_trajectory: width mismatch (" + std::to_string(target.width()) +
                             " vs " + std::to_string(source.width()) + ")");
    }
    if (range.begin > range.end || range.end > target.size() || range.end > source.size()) {
        throw BoundsError("copy_trajectory: range [" + std::to_string(range.begin) + ", " +
                          std::to_string(range.end) + ") exceeds a sequence");
    }
    std::vector<double> data(target.data().begin(), target.data().end());
    const std::size_t w = target.width();
    for (std::size_t t = range.begin; t < range.end; ++t) {
        copy_trajectory_into(std::span<double>(data).subspan(t * w, w), source.frame(t));
    }
    return MotionSequence(w, std::move(data), target.fps());
}

MotionSequence window_at(const MotionSequence& seq, std::size_t start, std::size_t length) {
    if (start >= seq.size()) {
        throw BoundsError("window start " + std::to_string(start) + " beyond sequence of " +
                          std::to_string(seq.size()) + " frames");
    }
    if (length == 0) throw ArgumentError("window length must be positive");
    return seq.slice(start, std::min(start + length, seq.size()));
}

MotionSequence splice(const MotionSequence& prev, const MotionSequence& new_window,
                      std::size_t keep_new) {
    if (prev.width() != new_window.width()) {
        throw DimensionError("splice: width mismatch (" + std::to_string(prev.width()) + " vs " +
                             std::to_string(new_window.width()) + ")");
    }
    if (keep_new > new_window.size()) {
        throw ArgumentError("splice: keep_new " + std::to_string(keep_new) + " exceeds window of " +
                            std::to_string(new_window.size()) + " frames");
    }
    MotionSequence out = prev;
    out.append(new_window.slice(new_window.size() - keep_new, new_window.size()));
    return out;
}

}  // namespace mstream
