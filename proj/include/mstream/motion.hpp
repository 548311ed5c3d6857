#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace mstream {

// Root trajectory occupies feature indices [0, 3) of every frame.
inline constexpr std::size_t kTrajectoryDims = 3;
inline constexpr std::size_t kMinFrameWidth = kTrajectoryDims + 1;
inline constexpr double kDefaultFps = 20.0;
inline constexpr std::size_t kDefaultJointCount = 22;

// Ordered frames of width d stored row-major. Every entry is finite and every
// frame has the same width (d >= 4). fps is carried as metadata only.
class MotionSequence {
public:
    explicit MotionSequence(std::size_t width, double fps = kDefaultFps);
    MotionSequence(std::size_t width, std::vector<double> data, double fps = kDefaultFps);

    static MotionSequence from_rows(const std::vector<std::vector<double>>& rows,
                                    double fps = kDefaultFps);

    std::size_t size() const noexcept { return data_.size() / width_; }
    bool empty() const noexcept { return data_.empty(); }
    std::size_t width() const noexcept { return width_; }
    double fps() const noexcept { return fps_; }

    std::span<const double> frame(std::size_t t) const;
    std::span<const double> data() const noexcept { return data_; }

    void append(std::span<const double> frame);
    void append(const MotionSequence& other);
    void reserve(std::size_t frames) { data_.reserve(frames * width_); }

    // Frames [begin, end).
    MotionSequence slice(std::size_t begin, std::size_t end) const;

    friend bool operator==(const MotionSequence& a, const MotionSequence& b) {
        return a.width_ == b.width_ && a.data_ == b.data_;
    }

private:
    std::size_t width_;
    double fps_;
    std::vector<double> data_;
};

// Ordered frames of J joints with 3D coordinates, stored as T x J x 3.
class JointSequence {
public:
    explicit JointSequence(std::size_t joint_count = kDefaultJointCount, double fps = kDefaultFps);
    JointSequence(std::size_t joint_count, std::vector<double> data, double fps = kDefaultFps);

    std::size_t size() const noexcept { return data_.size() / (3 * joint_count_); }
    bool empty() const noexcept { return data_.empty(); }
    std::size_t joint_count() const noexcept { return joint_count_; }
    double fps() const noexcept { return fps_; }

    // J*3 values of frame t.
    std::span<const double> frame(std::size_t t) const;
    std::array<double, 3> joint(std::size_t t, std::size_t j) const;
    std::span<const double> data() const noexcept { return data_; }

    void append(std::span<const double> frame);
    void append(const JointSequence& other);

    JointSequence slice(std::size_t begin, std::size_t end) const;

    friend bool operator==(const JointSequence& a, const JointSequence& b) {
        return a.joint_count_ == b.joint_count_ && a.data_ == b.data_;
    }

private:
    std::size_t joint_count_;
    double fps_;
    std::vector<double> data_;
};

struct FrameParts {
    std::array<double, kTrajectoryDims> traj{};
    std::vector<double> feat;
};

// x = [traj(x), feat(x)]. Lossless.
FrameParts decompose(std::span<const double> frame);
std::vector<double> recompose(const FrameParts& parts);

// Half-open frame interval.
struct FrameRange {
    std::size_t begin = 0;
    std::size_t end = 0;
};

// Copies source's root trajectory into target over `range`; every other entry of
// target is kept bit-identical.
MotionSequence copy_trajectory(const MotionSequence& target, const MotionSequence& source,
                               FrameRange range);

// In-place single-frame form used on hot paths.
void copy_trajectory_into(std::span<double> target_frame, std::span<const double> source_frame);

// Frames [start, min(start + length, size)).
MotionSequence window_at(const MotionSequence& seq, std::size_t start, std::size_t length);

// prev followed by the last keep_new frames of new_window.
MotionSequence splice(const MotionSequence& prev, const MotionSequence& new_window,
                      std::size_t keep_new);

}  // namespace mstream
