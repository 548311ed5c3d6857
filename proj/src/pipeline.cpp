#include "mstream/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "mstream/errors.hpp"
#include "mstream/rng.hpp"

namespace mstream {

namespace {

using Clock = std::chrono::steady_clock;

double micros_since(Clock::time_point& mark) {
    const auto now = Clock::now();
    const double us = std::chrono::duration<double, std::micro>(now - mark).count();
    mark = now;
    return us;
}

std::string violated(const std::string& constraint, const std::string& detail) {
    return constraint + " violated (" + detail + ")";
}

}  // namespace

std::string_view to_string(PipelineMode mode) {
    switch (mode) {
        case PipelineMode::proposed: return "proposed";
        case PipelineMode::naive: return "naive";
        case PipelineMode::offline: return "offline";
        case PipelineMode::no_reencode: return "no_reencode";
        case PipelineMode::noncausal: return "noncausal";
    }
    return "unknown";
}

std::string_view to_string(WarmupMode mode) {
    return mode == WarmupMode::strict ? "strict" : "repeat";
}

PipelineMode parse_mode(std::string_view name) {
    for (auto m : {PipelineMode::proposed, PipelineMode::naive, PipelineMode::offline,
                   PipelineMode::no_reencode, PipelineMode::noncausal}) {
        if (name == to_string(m)) return m;
    }
    throw ConfigError("unknown mode '" + std::string(name) +
                      "' (expected proposed, naive, offline, no_reencode or noncausal)");
}

WarmupMode parse_warmup(std::string_view name) {
    if (name == "strict") return WarmupMode::strict;
    if (name == "repeat") return WarmupMode::repeat;
    throw ConfigError("unknown warm-up mode '" + std::string(name) + "' (expected strict or repeat)");
}

void PipelineConfig::validate() const {
    if (stride == 0) throw ConfigError(violated("stride > 0", "stride=0"));
    if (stride > reencode) {
        throw ConfigError(violated("stride ≤ re-encode length",
                                   "stride=" + std::to_string(stride) + ", reencode=" + std::to_string(reencode)));
    }
    if (reencode > window) {
        throw ConfigError(violated("re-encode length ≤ window length",
                                   "reencode=" + std::to_string(reencode) + ", window=" + std::to_string(window)));
    }
    if (buffer_capacity == 0) throw ConfigError(violated("buffer capacity ≥ 1", "buffer=0"));
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw ConfigError(violated("0 ≤ alpha ≤ 1", "alpha=" + std::to_string(alpha)));
    }
    if (steps < 1) throw ConfigError(violated("steps ≥ 1", "steps=" + std::to_string(steps)));
    if (retention != 0 && retention < window + reencode) {
        throw ConfigError(violated("retention ≥ window + re-encode length",
                                   "retention=" + std::to_string(retention)));
    }
    if (effective_prefill() > window) {
        throw ConfigError(violated("prefill ≤ window length", "prefill=" + std::to_string(prefill)));
    }
}

void PipelineConfig::validate_for(const BackendDescriptor& desc) const {
    validate();
    if (window > desc.max_window) {
        throw ConfigError(violated("window length ≤ backend max window",
                                   "window=" + std::to_string(window) +
                                       ", max_window=" + std::to_string(desc.max_window)));
    }
}

LatentBuffer::LatentBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("latent buffer capacity must be >= 1");
    items_.reserve(capacity + 1);
}

void LatentBuffer::push(Latent z) {
    items_.push_back(std::move(z));
    if (items_.size() > capacity_) {
        items_.erase(items_.begin(), items_.begin() + static_cast<std::ptrdiff_t>(items_.size() - capacity_));
    }
}

const Latent& LatentBuffer::back() const {
    if (items_.empty()) throw ArgumentError("latent buffer is empty");
    return items_.back();
}

std::uint64_t stride_noise_seed(std::uint64_t seed, std::size_t index) noexcept {
    return mix_seed(seed, static_cast<std::uint64_t>(index));
}

MotionSequence decode_for_emission(const Backend& backend, PipelineMode mode, std::span<const Latent> buffer,
                                   std::size_t out_len) {
    if (mode == PipelineMode::noncausal) {
        if (buffer.empty()) throw ArgumentError("emission decode: empty latent buffer");
        return backend.decode_tail(buffer.back(), out_len);
    }
    return backend.causal_decode(buffer, out_len);
}

StreamingPipeline::StreamingPipeline(PipelineConfig config, std::shared_ptr<const Backend> backend,
                                     StyleEmbedding initial_style)
    : config_(config),
      backend_(std::move(backend)),
      style_(std::move(initial_style)),
      width_(backend_ ? backend_->descriptor().frame_width : 0),
      input_(width_ == 0 ? 1 : width_),
      output_(width_ == 0 ? 1 : width_),
      joints_(backend_ ? 3 * backend_->descriptor().joint_count : 3),
      buffer_(config.buffer_capacity == 0 ? 1 : config.buffer_capacity) {
    if (!backend_) throw ArgumentError("pipeline needs a backend");
    config_.validate_for(backend_->descriptor());
    if (config_.mode == PipelineMode::offline) {
        throw ConfigError("offline mode is a single pass over the whole input; it does not stream");
    }
    backend_->check_style(style_);
    if (config_.warmup == WarmupMode::strict) started_ = true;
}

void StreamingPipeline::set_style(StyleEmbedding style) {
    backend_->check_style(style);
    style_ = std::move(style);
}

std::size_t StreamingPipeline::frames_until_stride() const noexcept {
    if (!started_) return config_.effective_prefill() - received_;
    const std::size_t need = cursor_ + config_.window;
    const std::size_t have = input_.end_index();
    return need > have ? need - have : 0;
}

bool StreamingPipeline::stride_ready() const noexcept {
    return started_ && input_.end_index() >= cursor_ + config_.window;
}

void StreamingPipeline::start_repeat_warmup() {
    // Pre-roll of L - P frames that continues cyclically into the first P real frames.
    const std::size_t p = config_.effective_prefill();
    preroll_ = config_.window - p;
    for (std::size_t v = 0; v < preroll_; ++v) {
        const std::size_t src = (v % p + p - preroll_ % p) % p;
        input_.append(std::span<const double>(pending_).subspan(src * width_, width_));
    }
    for (std::size_t i = 0; i < p; ++i) {
        input_.append(std::span<const double>(pending_).subspan(i * width_, width_));
    }
    pending_.clear();
    pending_.shrink_to_fit();
    started_ = true;
}

void StreamingPipeline::accept(std::span<const double> frame) {
    if (frame.size() != width_) {
        throw DimensionError("frame width " + std::to_string(frame.size()) + " != backend width " +
                             std::to_string(width_));
    }
    for (double v : frame) {
        if (!std::isfinite(v)) throw ArgumentError("non-finite value in input frame");
    }
    ++received_;
    if (started_) {
        input_.append(frame);
        return;
    }
    pending_.insert(pending_.end(), frame.begin(), frame.end());
    if (received_ == config_.effective_prefill()) start_repeat_warmup();
}

JointSequence StreamingPipeline::push_frame(std::span<const double> frame) {
    accept(frame);
    JointSequence emitted(backend_->descriptor().joint_count);
    while (stride_ready()) step(emitted);
    return emitted;
}

JointSequence StreamingPipeline::push_frames(const MotionSequence& frames) {
    if (frames.width() != width_) {
        throw DimensionError("frame width " + std::to_string(frames.width()) + " != backend width " +
                             std::to_string(width_));
    }
    JointSequence emitted(backend_->descriptor().joint_count);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        accept(frames.frame(i));
        while (stride_ready()) step(emitted);
    }
    return emitted;
}

void StreamingPipeline::append_output(std::span<const double> frame, std::size_t index) {
    output_.append(frame);
    // tau(Y) = tau(X)
    copy_trajectory_into(output_.at(index), input_.at(index));
}

void StreamingPipeline::step(JointSequence& emitted) {
    const Backend& be = *backend_;
    const std::size_t L = config_.window;
    const std::size_t stride = config_.stride;
    const std::size_t M = config_.reencode;
    const std::size_t t = cursor_;
    const std::size_t end = t + L;
    const bool first = strides_ == 0;
    const PipelineMode mode = config_.mode;
    StageTimes times;
    auto mark = Clock::now();

    try {
        // z_t = E(X_{t:t+L})
        const MotionSequence window(width_, input_.copy_range(t, end));
        const Latent z = be.encode(window);
        times.encode = micros_since(mark);

        // [tau_t, c_t] = X_{t:t+L};  z~_t = Phi(z_t | c_t, tau_t, s)
        const Conditioning cond = split_conditions(window);
        const Latent z_denoised =
            be.denoise(z, cond, style_, DenoiseOptions{config_.steps, stride_noise_seed(config_.seed, strides_)});
        times.denoise = micros_since(mark);

        // Y^new = D(z~_t); the first stride needs the whole window to seed Y_prev.
        const std::size_t fresh_count = first ? L : stride;
        const std::size_t fresh_begin = end - fresh_count;
        MotionSequence fresh = be.decode_tail(z_denoised, fresh_count);
        std::vector<double> fresh_data(fresh.data().begin(), fresh.data().end());
        for (std::size_t i = 0; i < fresh_count; ++i) {
            copy_trajectory_into(std::span<double>(fresh_data).subspan(i * width_, width_),
                                 input_.at(fresh_begin + i));
        }
        times.decode = micros_since(mark);

        if (mode == PipelineMode::naive) {
            for (std::size_t i = 0; i < fresh_count; ++i) {
                append_output(std::span<const double>(fresh_data).subspan(i * width_, width_), fresh_begin + i);
            }
        } else {
            // Y_int = Y_prev_{..t+L-delta} || Y^new_{t+L-delta:t+L}, trajectory copied.
            // Only its last M frames are needed: they feed z_new = E(Y_int_{t+L-M:t+L}).
            Latent z_cur;
            if (mode == PipelineMode::no_reencode) {
                z_cur = z_denoised;
            } else {
                std::vector<double> segment;
                segment.reserve(M * width_);
                if (first) {
                    segment.assign(fresh_data.end() - static_cast<std::ptrdiff_t>(M * width_), fresh_data.end());
                } else {
                    segment = output_.copy_range(end - M, end - stride);
                    segment.insert(segment.end(), fresh_data.begin(), fresh_data.end());
                }
                const Latent z_new = be.encode(MotionSequence(width_, std::move(segment)));
                // z_cur = alpha z_new + (1 - alpha) z_recent; z_new alone when the buffer is empty.
                z_cur = buffer_.empty() ? z_new : blend(z_new, buffer_.back(), config_.alpha);
            }
            // Z <- (Z u {z_cur})[-K:]
            buffer_.push(std::move(z_cur));
            times.reencode = micros_since(mark);

            // Y^_{t+L-M:t+L} = Psi(Z)
            const MotionSequence decoded = decode_for_emission(be, mode, buffer_.items(), M);
            times.causal_decode = micros_since(mark);

            // Y^new = Y_prev_{..t+L-delta} || Y^_{t+L-delta:t+L}, trajectory copied, stored as Y_prev.
            if (first) {
                for (std::size_t i = 0; i + stride < L; ++i) {
                    append_output(std::span<const double>(fresh_data).subspan(i * width_, width_), t + i);
                }
            }
            for (std::size_t i = M - stride; i < M; ++i) append_output(decoded.frame(i), end - M + i);
        }

        // J = f(Y^new); only frames not emitted before are mapped and appended.
        const std::size_t emit_begin = first ? t : end - stride;
        const MotionSequence new_features(width_, output_.copy_range(emit_begin, end));
        const JointSequence new_joints = be.features_to_joints(new_features);
        for (std::size_t i = 0; i < new_joints.size(); ++i) joints_.append(new_joints.frame(i));
        emitted.append(new_joints);
        times.bookkeeping = micros_since(mark);
    } catch (const Error& e) {
        throw BackendError("stride " + std::to_string(strides_) + ": " + e.what());
    }

    cursor_ += stride;
    ++strides_;
    last_times_ = times;
    trim_history();
}

void StreamingPipeline::trim_history() {
    const std::size_t keep = config_.retention;
    if (keep == 0) return;
    // The next window starts at cursor_; older input is never read again.
    const std::size_t input_floor =
        input_.end_index() > keep ? std::min(cursor_, input_.end_index() - keep) : 0;
    input_.drop_before(input_floor);
    output_.keep_last(keep);
    joints_.keep_last(keep);
}

std::size_t StreamingPipeline::state_size() const noexcept {
    std::size_t n = input_.live() * input_.width() + output_.live() * output_.width() +
                    joints_.live() * joints_.width() + pending_.size();
    for (const auto& z : buffer_.items()) n += z.shape().numel();
    return n;
}

StreamResult run_stream(const MotionSequence& input, std::shared_ptr<const Backend> backend,
                        const PipelineConfig& config, const StyleEmbedding& style) {
    const std::size_t joint_count = backend->descriptor().joint_count;
    if (config.mode == PipelineMode::offline) {
        MotionSequence features = run_offline_features(input, *backend, config, style);
        JointSequence joints = backend->features_to_joints(features);
        return StreamResult{std::move(joints), std::move(features), 0, 0, 1, {}};
    }
    StreamingPipeline pipe(config, backend, style);
    StreamResult result{JointSequence(joint_count, input.fps()), MotionSequence(input.width(), input.fps()), 0, 0, 0, {}};
    for (std::size_t i = 0; i < input.size(); ++i) {
        const std::size_t before = pipe.strides();
        result.joints.append(pipe.push_frame(input.frame(i)));
        if (pipe.strides() != before) result.stride_times.push_back(pipe.last_stage_times());
    }
    const auto& out = pipe.output_features();
    result.features = MotionSequence(input.width(), out.copy_range(out.begin_index(), out.end_index()), input.fps());
    result.steady_state_begin = pipe.steady_state_begin();
    result.warmup_frames = pipe.warmup_frames();
    result.strides = pipe.strides();
    return result;
}

JointSequence run_naive_baseline(const MotionSequence& input, std::shared_ptr<const Backend> backend,
                                 PipelineConfig config, const StyleEmbedding& style) {
    if (input.size() < config.window) {
        throw ArgumentError("naive baseline needs at least one full window (" + std::to_string(config.window) +
                            " frames), got " + std::to_string(input.size()));
    }
    config.mode = PipelineMode::naive;
    config.warmup = WarmupMode::strict;
    StreamingPipeline pipe(config, std::move(backend), style);
    return pipe.push_frames(input);
}

MotionSequence run_offline_features(const MotionSequence& input, const Backend& backend,
                                    const PipelineConfig& config, const StyleEmbedding& style) {
    if (input.empty()) throw ArgumentError("offline run needs a non-empty input");
    if (input.size() > backend.descriptor().max_window) {
        throw ArgumentError("offline run: input of " + std::to_string(input.size()) +
                            " frames exceeds the backend max window " +
                            std::to_string(backend.descriptor().max_window));
    }
    if (config.steps < 1) throw ConfigError("steps ≥ 1 violated");
    const Latent z = backend.encode(input);
    const Latent z_denoised = backend.denoise(z, split_conditions(input), style,
                                              DenoiseOptions{config.steps, stride_noise_seed(config.seed, 0)});
    MotionSequence decoded = backend.decode_tail(z_denoised, input.size());
    MotionSequence features(input.width(), std::vector<double>(decoded.data().begin(), decoded.data().end()),
                            input.fps());
    return copy_trajectory(features, input, FrameRange{0, input.size()});
}

JointSequence run_offline(const MotionSequence& input, const Backend& backend, const PipelineConfig& config,
                          const StyleEmbedding& style) {
    return backend.features_to_joints(run_offline_features(input, backend, config, style));
}

}  // namespace mstream
