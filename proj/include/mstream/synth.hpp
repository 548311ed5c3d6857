#pragma once

#include <cstddef>
#include <cstdint>

#include "mstream/motion.hpp"

namespace mstream {

// Smooth seeded test motion: each feature channel is a sum of two slow
// sinusoids with seeded parameters; the root trajectory
// walks forward with a gentle sway. Frequencies stay below 1 Hz so the
// sequence has low intrinsic jitter.
MotionSequence synth_motion(std::size_t frames, std::size_t width, std::uint64_t seed, double fps = kDefaultFps);

}  // namespace mstream
