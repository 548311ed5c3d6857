#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "mstream/latent.hpp"
#include "mstream/linear_backend.hpp"
#include "mstream/motion.hpp"
#include "mstream/rng.hpp"

namespace testutil {

inline mstream::MotionSequence random_motion(std::size_t frames, std::size_t width, std::uint64_t seed) {
    mstream::SplitMix64 rng(seed);
    std::vector<double> data(frames * width);
    for (double& v : data) v = rng.symmetric();
    return mstream::MotionSequence(width, std::move(data));
}

inline mstream::Latent random_latent(mstream::LatentShape shape, std::uint64_t seed) {
    mstream::SplitMix64 rng(seed);
    std::vector<double> data(shape.numel());
    for (double& v : data) v = rng.symmetric();
    return mstream::Latent(shape, std::move(data));
}

inline mstream::JointSequence random_joints(std::size_t frames, std::size_t joints, std::uint64_t seed) {
    mstream::SplitMix64 rng(seed);
    std::vector<double> data(frames * joints * 3);
    for (double& v : data) v = 10.0 * rng.symmetric();
    return mstream::JointSequence(joints, std::move(data));
}

// 1 joint, 4 frames at (t^2, t^2, t^2).
inline mstream::JointSequence quadratic_joints() {
    std::vector<double> data;
    for (int t = 0; t < 4; ++t) {
        const double v = double(t * t);
        data.insert(data.end(), {v, v, v});
    }
    return mstream::JointSequence(1, std::move(data));
}

// Small toy for fast pipeline tests.
inline mstream::ToyOptions small_toy(std::uint64_t seed = 1) {
    mstream::ToyOptions o;
    o.frame_width = 12;
    o.joint_count = 4;
    o.channels = 8;
    o.style_dim = 4;
    o.seed = seed;
    return o;
}

inline mstream::StyleEmbedding zero_style(std::size_t dim) { return {std::vector<double>(dim, 0.0), "zero"}; }

}  // namespace testutil
