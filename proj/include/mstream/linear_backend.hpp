#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "mstream/backend.hpp"
#include "mstream/matrix.hpp"

namespace mstream {

// Parameters of the linear reference backend.
//
// Time layout: a window of n <= max_window frames occupies the trailing slots
// [max_window - n, max_window) of a fixed slot timeline. Slot s belongs to
// token floor(s * tokens / max_window).
//
//   encode    z_k = encoder * mean(frames in token k's occupied slots), 0 if none
//   decode    base_s = decoder * z_{token(s)}; out_s = sum_r kernel_r * base_{clamp(s + r - h)}
//             with h = (len(kernel) - 1) / 2. A kernel wider than one tap looks
//             ahead in time, which makes D non-causal.
//   denoise   z~_k = z_k + style_proj * style + noise * eps, eps in [-1, 1)^channels
//             drawn from SplitMix64(mix_seed(seed, noise_seed)) and broadcast over
//             tokens. Conditioning is validated but does not enter the result;
//             steps only scale the surrogate cost below.
//   Psi       w_age = causal_decay^age (age 0 = newest, w_0 = 1), normalized;
//             zbar = sum_i w_i z_i (oldest to newest, zero weights skipped);
//             out = decoder * zbar_{token(s)} over the last out_len slots. No
//             lookahead: each output slot reads its own token only.
//   f         joints = joint_map * frame   (3J x d)
//   style     embed = style_embed_proj * temporal mean frame
//
// Surrogate cost: each denoise step runs `denoise_work` passes of
// mixing * z~_k over all tokens with the result discarded. This models the
// per-step network cost so step count affects throughput, never values.
struct LinearParams {
    std::size_t frame_width = 0;
    std::size_t tokens = 0;
    std::size_t channels = 0;
    std::size_t style_dim = 0;
    std::size_t joint_count = 0;
    std::size_t max_window = 0;

    Matrix encoder;           // channels x d
    Matrix decoder;           // d x channels
    Matrix style_proj;        // channels x style_dim
    Matrix joint_map;         // 3J x d
    Matrix style_embed_proj;  // style_dim x d
    Matrix mixing;            // channels x channels (surrogate only)

    std::vector<double> decoder_kernel{1.0};
    double causal_decay = 0.5;
    double noise = 0.0;
    int denoise_work = 1;
    std::uint64_t seed = 0;
    std::string name = "linear";
};

// Seeded generation of the toy parameters. Generator: one SplitMix64(seed)
// stream, consumed in this order, each value symmetric() in [-1, 1):
//   1. G (max(C,d) x min(C,d)) row-major; modified Gram-Schmidt on its columns
//      gives Q. C >= d: encoder = Q, decoder = Q^T. C < d: encoder = Q^T,
//      decoder = Q. decoder = encoder^T either way.
//   2. style_proj (C x S) / sqrt(S)        (skipped, zero, if !style_sensitive)
//   3. joint_map (3J x d) / sqrt(d)
//   4. style_embed_proj (S x d) / sqrt(d)
//   5. mixing (C x C) / sqrt(C)
struct ToyOptions {
    std::size_t frame_width = 263;
    std::size_t joint_count = kDefaultJointCount;
    std::size_t max_window = 60;
    std::size_t tokens = 0;  // 0: one token per slot
    std::size_t channels = 32;
    std::size_t style_dim = 16;
    double noise = 0.0;
    double causal_decay = 0.5;
    bool decoder_smoothing = false;  // 3-tap {0.25, 0.5, 0.25} kernel
    bool style_sensitive = true;
    int denoise_work = 1;
    std::uint64_t seed = 0;
};

LinearParams generate_toy_params(const ToyOptions& opts);

// Identity configuration: one token per slot, channels == d, encoder and
// decoder exact identities, single-tap kernel, causal_decay 0, zero style
// projection, no noise. decode(encode(W)) reproduces W in its trailing slots
// and Psi of a single latent reproduces the encoded segment, bit-exactly.
LinearParams identity_params(std::size_t frame_width, std::size_t joint_count = kDefaultJointCount,
                             std::size_t max_window = 60, std::size_t style_dim = 16,
                             std::uint64_t seed = 0);

class LinearBackend final : public Backend {
public:
    explicit LinearBackend(LinearParams params);

    const BackendDescriptor& descriptor() const noexcept override { return desc_; }
    const LinearParams& params() const noexcept { return p_; }

    std::size_t token_of_slot(std::size_t slot) const noexcept {
        return slot * p_.tokens / p_.max_window;
    }
    // Normalized Psi weights for a buffer of `count` latents, oldest first.
    std::vector<double> causal_weights(std::size_t count) const;
    // The per-call noise vector (before scaling by `noise`).
    std::vector<double> noise_direction(std::uint64_t noise_seed) const;

protected:
    Latent do_encode(const MotionSequence& window) const override;
    MotionSequence do_decode(const Latent& z) const override;
    MotionSequence do_decode_tail(const Latent& z, std::size_t count) const override;
    Latent do_denoise(const Latent& z, const Conditioning& cond, const StyleEmbedding& style,
                      const DenoiseOptions& opts) const override;
    MotionSequence do_causal_decode(std::span<const Latent> buffer, std::size_t out_len) const override;
    JointSequence do_features_to_joints(const MotionSequence& seq) const override;
    StyleEmbedding do_style_embed(const MotionSequence& style_motion) const override;

private:
    MotionSequence decode_slots(const Latent& z, std::size_t first_slot) const;

    LinearParams p_;
    BackendDescriptor desc_;
    bool plain_kernel_ = true;
};

std::shared_ptr<const LinearBackend> make_toy_backend(const ToyOptions& opts);
std::shared_ptr<const LinearBackend> make_identity_backend(std::size_t frame_width,
                                                           std::size_t joint_count = kDefaultJointCount,
                                                           std::size_t max_window = 60);

// Serialized weights: the extension point for backends loaded from a file.
void save_linear_weights(const LinearParams& params, const std::filesystem::path& path);
LinearParams load_linear_weights(const std::filesystem::path& path);

}  // namespace mstream
