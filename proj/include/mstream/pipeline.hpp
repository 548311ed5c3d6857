#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mstream/backend.hpp"
#include "mstream/frame_log.hpp"
#include "mstream/latent.hpp"
#include "mstream/motion.hpp"

namespace mstream {

enum class PipelineMode {
    proposed,     // full streaming loop with re-encode, blend and causal decoder
    naive,        // offline model per shifted window, last stride frames concatenated
    offline,      // single pass over the whole input (run_offline only)
    no_reencode,  // denoised latent goes straight into the buffer
    noncausal,    // causal decoder replaced by D over the newest buffer latent
};

enum class WarmupMode {
    strict,  // wait for `window` real frames
    repeat,  // fill the first window by cyclically repeating the first frames
};

std::string_view to_string(PipelineMode mode);
std::string_view to_string(WarmupMode mode);
PipelineMode parse_mode(std::string_view name);
WarmupMode parse_warmup(std::string_view name);

struct PipelineConfig {
    std::size_t window = 60;          // L
    std::size_t stride = 4;           // delta
    std::size_t reencode = 30;        // M
    std::size_t buffer_capacity = 30; // K
    double alpha = 0.8;
    int steps = 10;
    PipelineMode mode = PipelineMode::proposed;
    WarmupMode warmup = WarmupMode::strict;
    std::size_t prefill = 0;          // repeat warm-up: real frames before the first stride (0 = stride)
    std::size_t retention = 0;        // frames kept per history log (0 = unlimited, else >= L + M)
    std::uint64_t seed = 0;           // denoiser noise seed

    // Throws ConfigError naming the violated constraint.
    void validate() const;
    void validate_for(const BackendDescriptor& desc) const;
    std::size_t effective_prefill() const noexcept { return prefill == 0 ? stride : prefill; }
};

// The K most recent blended latents, oldest first.
class LatentBuffer {
public:
    explicit LatentBuffer(std::size_t capacity);

    void push(Latent z);
    void clear() noexcept { items_.clear(); }

    std::size_t size() const noexcept { return items_.size(); }
    bool empty() const noexcept { return items_.empty(); }
    std::size_t capacity() const noexcept { return capacity_; }
    const Latent& back() const;
    std::span<const Latent> items() const noexcept { return items_; }

private:
    std::size_t capacity_;
    std::vector<Latent> items_;
};

// Wall time per stage of one stride, microseconds.
struct StageTimes {
    double encode = 0;
    double denoise = 0;
    double decode = 0;
    double reencode = 0;       // re-encode + blend + buffer update
    double causal_decode = 0;
    double bookkeeping = 0;    // splice, trajectory copy, joint mapping

    double total() const noexcept {
        return encode + denoise + decode + reencode + causal_decode + bookkeeping;
    }
};

// Noise seed handed to the denoiser on stride `index`.
std::uint64_t stride_noise_seed(std::uint64_t seed, std::size_t index) noexcept;

// Decoder that produces the stride's emitted segment: Psi over the buffer, or
// for the noncausal ablation D over the newest latent. Returns `out_len` frames.
MotionSequence decode_for_emission(const Backend& backend, PipelineMode mode,
                                   std::span<const Latent> buffer, std::size_t out_len);

// Streaming state machine. Frames arrive through push_frames; every time a
// full window is available one stride runs and its joints are returned. The
// first stride emits the whole first window; each later stride emits `stride`
// frames. Emission is append-only.
//
// Indices are positions on the processing timeline. In strict warm-up that is
// the input index; in repeat warm-up the repeated pre-roll occupies
// [0, warmup_frames()) and input frame i sits at warmup_frames() + i.
//
// Single owner: not safe for concurrent mutation.
class StreamingPipeline {
public:
    StreamingPipeline(PipelineConfig config, std::shared_ptr<const Backend> backend,
                      StyleEmbedding initial_style);

    // Takes effect from the next stride.
    void set_style(StyleEmbedding style);
    const StyleEmbedding& style() const noexcept { return style_; }

    JointSequence push_frames(const MotionSequence& frames);
    JointSequence push_frame(std::span<const double> frame);

    const PipelineConfig& config() const noexcept { return config_; }
    const Backend& backend() const noexcept { return *backend_; }

    std::size_t cursor() const noexcept { return cursor_; }
    std::size_t strides() const noexcept { return strides_; }
    std::size_t frames_received() const noexcept { return received_; }
    std::size_t frames_emitted() const noexcept { return joints_.end_index(); }
    std::size_t warmup_frames() const noexcept { return preroll_; }
    // Index of the first frame emitted by a steady-state stride; metrics start here.
    std::size_t steady_state_begin() const noexcept { return config_.window; }
    // Frames to push before the next stride runs.
    std::size_t frames_until_stride() const noexcept;

    const LatentBuffer& buffer() const noexcept { return buffer_; }
    const FrameLog& input_log() const noexcept { return input_; }
    const FrameLog& output_features() const noexcept { return output_; }
    const FrameLog& output_joints() const noexcept { return joints_; }
    const StageTimes& last_stage_times() const noexcept { return last_times_; }

    // Doubles held by the history logs and the latent buffer.
    std::size_t state_size() const noexcept;

private:
    bool stride_ready() const noexcept;
    void start_repeat_warmup();
    void accept(std::span<const double> frame);
    void step(JointSequence& emitted);
    void append_output(std::span<const double> frame, std::size_t index);
    void trim_history();

    PipelineConfig config_;
    std::shared_ptr<const Backend> backend_;
    StyleEmbedding style_;
    std::size_t width_;

    FrameLog input_;    // X on the processing timeline
    FrameLog output_;   // Y_prev: trajectory-corrected emitted features
    FrameLog joints_;   // J_final
    LatentBuffer buffer_;
    std::vector<double> pending_;  // repeat warm-up frames received before the pre-roll exists

    std::size_t cursor_ = 0;
    std::size_t strides_ = 0;
    std::size_t received_ = 0;
    std::size_t preroll_ = 0;
    bool started_ = false;
    StageTimes last_times_;
};

// Result of running a whole input through one mode.
struct StreamResult {
    JointSequence joints;
    MotionSequence features;
    std::size_t steady_state_begin = 0;
    std::size_t warmup_frames = 0;
    std::size_t strides = 0;
    std::vector<StageTimes> stride_times;
};

// Streams `input` through a pipeline in `config.mode` (offline runs run_offline).
StreamResult run_stream(const MotionSequence& input, std::shared_ptr<const Backend> backend,
                        const PipelineConfig& config, const StyleEmbedding& style);

// Offline model per window shifted by stride; first window whole, then the
// last `stride` frames of each window. Requires len(input) >= window.
JointSequence run_naive_baseline(const MotionSequence& input, std::shared_ptr<const Backend> backend,
                                 PipelineConfig config, const StyleEmbedding& style);

// One encode/denoise/decode pass over the whole input (len <= max_window),
// trajectory copied from the input. Uses the stride-0 noise seed.
MotionSequence run_offline_features(const MotionSequence& input, const Backend& backend,
                                    const PipelineConfig& config, const StyleEmbedding& style);
JointSequence run_offline(const MotionSequence& input, const Backend& backend,
                          const PipelineConfig& config, const StyleEmbedding& style);

}  // namespace mstream
