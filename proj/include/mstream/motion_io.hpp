#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "mstream/motion.hpp"

namespace mstream {

// Text formats. Line 1 is a JSON header object; every following line holds one
// frame as whitespace-separated numbers.
//
//   {"kind":"motion","d":263,"fps":20,"joint_count":22,"frame_count":120}
//   {"kind":"joints","joint_count":22,"fps":20,"frame_count":120,"warmup_frames":60}
//
// Motion rows carry d numbers; joint rows carry joint_count * 3 numbers
// (x y z per joint). Numbers use the shortest decimal form that round-trips.
// warmup_frames marks leading frames that metrics skip.

struct MotionFile {
    MotionSequence motion;
    std::size_t joint_count = kDefaultJointCount;
};

struct JointsFile {
    JointSequence joints;
    std::size_t warmup_frames = 0;
};

std::string format_number(double value);

void write_motion(std::ostream& out, const MotionSequence& motion, std::size_t joint_count = kDefaultJointCount);
MotionFile read_motion(std::istream& in);

void write_joints(std::ostream& out, const JointSequence& joints, std::size_t warmup_frames = 0);
JointsFile read_joints(std::istream& in);

void write_motion_file(const std::filesystem::path& path, const MotionSequence& motion,
                       std::size_t joint_count = kDefaultJointCount);
MotionFile read_motion_file(const std::filesystem::path& path);
void write_joints_file(const std::filesystem::path& path, const JointSequence& joints,
                       std::size_t warmup_frames = 0);
JointsFile read_joints_file(const std::filesystem::path& path);

}  // namespace mstream
