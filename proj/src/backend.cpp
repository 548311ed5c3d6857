#include "mstream/backend.hpp"

#include <cmath>
#include <string>

#include "mstream/errors.hpp"

namespace mstream {

Conditioning split_conditions(const MotionSequence& window) {
    Conditioning cond;
    cond.frames = window.size();
    cond.content_width = window.width() - kTrajectoryDims;
    cond.content.reserve(cond.frames * cond.content_width);
    cond.trajectory.reserve(cond.frames);
    for (std::size_t t = 0; t < window.size(); ++t) {
        const auto f = window.frame(t);
        cond.trajectory.push_back({f[0], f[1], f[2]});
        cond.content.insert(cond.content.end(), f.begin() + kTrajectoryDims, f.end());
    }
    return cond;
}

namespace {

void check_output(const MotionSequence& seq, const char* op) {
    for (double v : seq.data()) {
        if (!std::isfinite(v)) throw BackendError(std::string(op) + " produced a non-finite value");
    }
}

void check_output(const Latent& z, const char* op) {
    if (!z.all_finite()) throw BackendError(std::string(op) + " produced a non-finite value");
}

}  // namespace

void Backend::check_latent(const Latent& z, const char* op) const {
    const auto& want = descriptor().latent_shape;
    if (!(z.shape() == want)) {
        throw DimensionError(std::string(op) + ": latent shape " + std::to_string(z.shape().tokens) + "x" +
                             std::to_string(z.shape().channels) + " does not match backend shape " +
                             std::to_string(want.tokens) + "x" + std::to_string(want.channels));
    }
}

void Backend::check_style(const StyleEmbedding& style) const {
    if (style.vec.size() != descriptor().style_dim) {
        throw DimensionError("style embedding has " + std::to_string(style.vec.size()) +
                             " entries, backend expects " + std::to_string(descriptor().style_dim));
    }
    for (double v : style.vec) {
        if (!std::isfinite(v)) throw ArgumentError("style embedding contains a non-finite value");
    }
}

Latent Backend::encode(const MotionSequence& window) const {
    const auto& desc = descriptor();
    if (window.width() != desc.frame_width) {
        throw DimensionError("encode: window width " + std::to_string(window.width()) +
                             " != backend width " + std::to_string(desc.frame_width));
    }
    if (window.empty()) throw ArgumentError("encode: empty window");
    if (window.size() > desc.max_window) {
        throw ArgumentError("encode: window of " + std::to_string(window.size()) +
                            " frames exceeds max window " + std::to_string(desc.max_window));
    }
    Latent z = do_encode(window);
    check_latent(z, "encode");
    check_output(z, "encode");
    return z;
}

MotionSequence Backend::decode(const Latent& z) const {
    check_latent(z, "decode");
    MotionSequence out = do_decode(z);
    if (out.size() != descriptor().max_window || out.width() != descriptor().frame_width) {
        throw BackendError("decode returned a sequence of the wrong shape");
    }
    check_output(out, "decode");
    return out;
}

MotionSequence Backend::decode_tail(const Latent& z, std::size_t count) const {
    check_latent(z, "decode");
    if (count == 0 || count > descriptor().max_window) {
        throw ArgumentError("decode_tail: count must lie in [1, max_window]");
    }
    MotionSequence out = do_decode_tail(z, count);
    if (out.size() != count) throw BackendError("decode_tail returned the wrong frame count");
    check_output(out, "decode");
    return out;
}

MotionSequence Backend::do_decode_tail(const Latent& z, std::size_t count) const {
    MotionSequence full = do_decode(z);
    return full.slice(full.size() - count, full.size());
}

Latent Backend::denoise(const Latent& z, const Conditioning& cond, const StyleEmbedding& style,
                        const DenoiseOptions& opts) const {
    check_latent(z, "denoise");
    check_style(style);
    if (opts.steps < 1) throw ArgumentError("denoise: steps must be >= 1");
    const auto& desc = descriptor();
    if (cond.content_width + kTrajectoryDims != desc.frame_width ||
        cond.content.size() != cond.frames * cond.content_width ||
        cond.trajectory.size() != cond.frames) {
        throw DimensionError("denoise: conditioning shape inconsistent with backend width");
    }
    Latent out = do_denoise(z, cond, style, opts);
    check_latent(out, "denoise");
    check_output(out, "denoise");
    return out;
}

MotionSequence Backend::causal_decode(std::span<const Latent> buffer, std::size_t out_len) const {
    if (buffer.empty()) throw ArgumentError("causal_decode: empty latent buffer");
    for (const auto& z : buffer) check_latent(z, "causal_decode");
    if (out_len == 0 || out_len > descriptor().max_window) {
        throw ArgumentError("causal_decode: out_len must lie in [1, max_window]");
    }
    MotionSequence out = do_causal_decode(buffer, out_len);
    if (out.size() != out_len || out.width() != descriptor().frame_width) {
        throw BackendError("causal_decode returned a sequence of the wrong shape");
    }
    check_output(out, "causal_decode");
    return out;
}

JointSequence Backend::features_to_joints(const MotionSequence& seq) const {
    if (seq.width() != descriptor().frame_width) {
        throw DimensionError("features_to_joints: width " + std::to_string(seq.width()) +
                             " != backend width " + std::to_string(descriptor().frame_width));
    }
    JointSequence out = do_features_to_joints(seq);
    if (out.size() != seq.size() || out.joint_count() != descriptor().joint_count) {
        throw BackendError("features_to_joints returned the wrong shape");
    }
    return out;
}

StyleEmbedding Backend::style_embed(const MotionSequence& style_motion) const {
    if (style_motion.empty()) throw ArgumentError("style_embed: empty style motion");
    if (style_motion.width() != descriptor().frame_width) {
        throw DimensionError("style_embed: width mismatch");
    }
    StyleEmbedding s = do_style_embed(style_motion);
    check_style(s);
    return s;
}

}  // namespace mstream
