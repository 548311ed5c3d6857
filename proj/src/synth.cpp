#include "mstream/synth.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "mstream/errors.hpp"
#include "mstream/rng.hpp"

namespace mstream {

MotionSequence synth_motion(std::size_t frames, std::size_t width, std::uint64_t seed, double fps) {
    if (width < kMinFrameWidth) throw ArgumentError("synth: width must be >= 4");
    if (!(fps > 0.0)) throw ArgumentError("synth: fps must be positive");
    struct Wave {
        double amp, freq, phase;
    };
    SplitMix64 rng(seed);
    std::vector<Wave> waves(2 * width);
    for (auto& w : waves) {
        w.amp = 0.2 + 0.8 * rng.uniform();
        w.freq = 0.1 + 0.8 * rng.uniform();  // Hz
        w.phase = 2.0 * std::numbers::pi * rng.uniform();
    }
    const double speed = 0.5 + rng.uniform();  // units per second
    std::vector<double> data(frames * width);
    for (std::size_t t = 0; t < frames; ++t) {
        const double sec = static_cast<double>(t) / fps;
        double* row = data.data() + t * width;
        row[0] = speed * sec;
        row[1] = 0.1 * std::sin(2.0 * std::numbers::pi * 0.5 * sec);
        row[2] = 0.05 * std::sin(2.0 * std::numbers::pi * 0.25 * sec + 1.0);
        for (std::size_t c = kTrajectoryDims; c < width; ++c) {
            double v = 0.0;
            for (int h = 0; h < 2; ++h) {
                const auto& w = waves[2 * c + h];
                v += w.amp * std::sin(2.0 * std::numbers::pi * w.freq * sec + w.phase);
            }
            row[c] = v;
        }
    }
    return MotionSequence(width, std::move(data), fps);
}

}  // namespace mstream
