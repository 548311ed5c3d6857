#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mstream/latent.hpp"
#include "mstream/motion.hpp"

namespace mstream {

struct BackendDescriptor {
    std::string name;
    std::size_t frame_width = 0;   // d
    LatentShape latent_shape;
    std::size_t style_dim = 0;
    std::size_t joint_count = 0;
    std::size_t max_window = 0;    // L_max; decode() returns this many frames
    bool deterministic = true;
};

// Per-window conditions handed to the denoiser: content c_t (non-trajectory
// features) and root trajectory tau_t, one row per window frame.
struct Conditioning {
    std::size_t frames = 0;
    std::size_t content_width = 0;
    std::vector<double> content;                      // frames x content_width
    std::vector<std::array<double, kTrajectoryDims>> trajectory;
};

// [tau_t, c_t] = X_{t:t+L}
Conditioning split_conditions(const MotionSequence& window);

struct DenoiseOptions {
    int steps = 10;
    // Seed for stochastic samplers; deterministic backends with no noise ignore it.
    std::uint64_t noise_seed = 0;
};

// Model-operator contract shared by every backend. Public members validate
// shapes and then dispatch to the do_* hooks; implementations may assume
// validated input. Instances are immutable after construction and safe to
// call concurrently.
class Backend {
public:
    virtual ~Backend() = default;

    virtual const BackendDescriptor& descriptor() const noexcept = 0;

    // z = E(window); 1 <= len(window) <= max_window.
    Latent encode(const MotionSequence& window) const;

    // D(z): max_window frames. Window frames map onto the trailing slots, so a
    // window of n frames is recovered from the last n decoded frames.
    MotionSequence decode(const Latent& z) const;

    // Last `count` frames of decode(z). Backends may override do_decode_tail
    // with a cheaper exact equivalent.
    MotionSequence decode_tail(const Latent& z, std::size_t count) const;

    Latent denoise(const Latent& z, const Conditioning& cond, const StyleEmbedding& style,
                   const DenoiseOptions& opts) const;

    // Psi(Z): out_len frames from the ordered buffer (oldest first). Output
    // depends on the buffer contents only.
    MotionSequence causal_decode(std::span<const Latent> buffer, std::size_t out_len) const;

    JointSequence features_to_joints(const MotionSequence& seq) const;

    StyleEmbedding style_embed(const MotionSequence& style_motion) const;

    void check_style(const StyleEmbedding& style) const;

protected:
    virtual Latent do_encode(const MotionSequence& window) const = 0;
    virtual MotionSequence do_decode(const Latent& z) const = 0;
    virtual MotionSequence do_decode_tail(const Latent& z, std::size_t count) const;
    virtual Latent do_denoise(const Latent& z, const Conditioning& cond, const StyleEmbedding& style,
                              const DenoiseOptions& opts) const = 0;
    virtual MotionSequence do_causal_decode(std::span<const Latent> buffer, std::size_t out_len) const = 0;
    virtual JointSequence do_features_to_joints(const MotionSequence& seq) const = 0;
    virtual StyleEmbedding do_style_embed(const MotionSequence& style_motion) const = 0;

private:
    void check_latent(const Latent& z, const char* op) const;
};

}  // namespace mstream
