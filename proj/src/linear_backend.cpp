#include "mstream/linear_backend.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mstream/errors.hpp"
#include "mstream/rng.hpp"

namespace mstream {

namespace {

template <typename T>
inline void keep_alive(const T& value) {
    asm volatile("" : : "g"(value) : "memory");
}

Matrix random_matrix(SplitMix64& rng, std::size_t rows, std::size_t cols, double scale) {
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = rng.symmetric() * scale;
    }
    return m;
}

// Modified Gram-Schmidt over the columns of a rows x cols matrix (rows >= cols).
Matrix orthonormal_columns(SplitMix64& rng, std::size_t rows, std::size_t cols) {
    Matrix g = random_matrix(rng, rows, cols, 1.0);
    for (std::size_t j = 0; j < cols; ++j) {
        for (std::size_t i = 0; i < j; ++i) {
            double dot = 0.0;
            for (std::size_t r = 0; r < rows; ++r) dot += g(r, i) * g(r, j);
            for (std::size_t r = 0; r < rows; ++r) g(r, j) -= dot * g(r, i);
        }
        double norm = 0.0;
        for (std::size_t r = 0; r < rows; ++r) norm += g(r, j) * g(r, j);
        norm = std::sqrt(norm);
        if (norm < 1e-12) throw BackendError("toy basis generation hit a degenerate column");
        for (std::size_t r = 0; r < rows; ++r) g(r, j) /= norm;
    }
    return g;
}

void validate(const LinearParams& p) {
    if (p.frame_width < kMinFrameWidth) throw ConfigError("linear backend: frame width must be >= 4");
    if (p.tokens == 0 || p.channels == 0 || p.style_dim == 0 || p.joint_count == 0 || p.max_window == 0) {
        throw ConfigError("linear backend: tokens, channels, style_dim, joint_count and max_window must be positive");
    }
    if (p.tokens > p.max_window) throw ConfigError("linear backend: tokens must not exceed max_window");
    auto expect = [](const Matrix& m, std::size_t rows, std::size_t cols, const char* what) {
        if (m.rows() != rows || m.cols() != cols) {
            throw ConfigError(std::string("linear backend: ") + what + " must be " + std::to_string(rows) +
                              "x" + std::to_string(cols));
        }
    };
    expect(p.encoder, p.channels, p.frame_width, "encoder");
    expect(p.decoder, p.frame_width, p.channels, "decoder");
    expect(p.style_proj, p.channels, p.style_dim, "style_proj");
    expect(p.joint_map, 3 * p.joint_count, p.frame_width, "joint_map");
    expect(p.style_embed_proj, p.style_dim, p.frame_width, "style_embed_proj");
    if (p.denoise_work > 0) expect(p.mixing, p.channels, p.channels, "mixing");
    if (p.decoder_kernel.empty() || p.decoder_kernel.size() % 2 == 0) {
        throw ConfigError("linear backend: decoder kernel must have an odd number of taps");
    }
    if (!(p.causal_decay >= 0.0 && p.causal_decay <= 1.0)) {
        throw ConfigError("linear backend: causal_decay must lie in [0, 1]");
    }
    if (!(p.noise >= 0.0) || !std::isfinite(p.noise)) throw ConfigError("linear backend: noise must be >= 0");
    if (p.denoise_work < 0) throw ConfigError("linear backend: denoise_work must be >= 0");
}

}  // namespace

LinearParams generate_toy_params(const ToyOptions& o) {
    LinearParams p;
    p.frame_width = o.frame_width;
    p.max_window = o.max_window;
    p.tokens = o.tokens == 0 ? o.max_window : o.tokens;
    p.channels = o.channels;
    p.style_dim = o.style_dim;
    p.joint_count = o.joint_count;
    p.noise = o.noise;
    p.causal_decay = o.causal_decay;
    p.denoise_work = o.denoise_work;
    p.seed = o.seed;
    p.name = "toy";
    if (o.frame_width < kMinFrameWidth || o.channels == 0 || o.style_dim == 0 || o.joint_count == 0 ||
        o.max_window == 0) {
        throw ConfigError("toy backend: frame_width >= 4 and positive channels, style_dim, joints, max_window required");
    }
    if (o.decoder_smoothing) p.decoder_kernel = {0.25, 0.5, 0.25};

    SplitMix64 rng(o.seed);
    const std::size_t d = o.frame_width;
    const std::size_t c = o.channels;
    const std::size_t s = o.style_dim;
    Matrix q = orthonormal_columns(rng, std::max(c, d), std::min(c, d));
    if (c >= d) {
        p.encoder = q;
        p.decoder = q.transposed();
    } else {
        p.encoder = q.transposed();
        p.decoder = q;
    }
    p.style_proj = o.style_sensitive ? random_matrix(rng, c, s, 1.0 / std::sqrt(double(s))) : Matrix(c, s);
    p.joint_map = random_matrix(rng, 3 * o.joint_count, d, 1.0 / std::sqrt(double(d)));
    p.style_embed_proj = random_matrix(rng, s, d, 1.0 / std::sqrt(double(d)));
    p.mixing = random_matrix(rng, c, c, 1.0 / std::sqrt(double(c)));
    return p;
}

LinearParams identity_params(std::size_t frame_width, std::size_t joint_count, std::size_t max_window,
                             std::size_t style_dim, std::uint64_t seed) {
    LinearParams p;
    p.name = "toy-identity";
    p.frame_width = frame_width;
    p.tokens = max_window;
    p.channels = frame_width;
    p.style_dim = style_dim;
    p.joint_count = joint_count;
    p.max_window = max_window;
    p.encoder = Matrix::identity(frame_width);
    p.decoder = Matrix::identity(frame_width);
    p.style_proj = Matrix(frame_width, style_dim);
    p.causal_decay = 0.0;
    p.noise = 0.0;
    p.denoise_work = 0;
    p.seed = seed;
    SplitMix64 rng(seed);
    p.joint_map = random_matrix(rng, 3 * joint_count, frame_width, 1.0 / std::sqrt(double(frame_width)));
    p.style_embed_proj = random_matrix(rng, style_dim, frame_width, 1.0 / std::sqrt(double(frame_width)));
    return p;
}

LinearBackend::LinearBackend(LinearParams params) : p_(std::move(params)) {
    validate(p_);
    desc_.name = p_.name;
    desc_.frame_width = p_.frame_width;
    desc_.latent_shape = {p_.tokens, p_.channels};
    desc_.style_dim = p_.style_dim;
    desc_.joint_count = p_.joint_count;
    desc_.max_window = p_.max_window;
    desc_.deterministic = true;
    plain_kernel_ = p_.decoder_kernel.size() == 1 && p_.decoder_kernel[0] == 1.0;
}

std::vector<double> LinearBackend::causal_weights(std::size_t count) const {
    std::vector<double> w(count, 0.0);
    if (count == 0) return w;
    double power = 1.0;
    double total = 0.0;
    for (std::size_t age = 0; age < count; ++age) {
        w[count - 1 - age] = power;
        total += power;
        power *= p_.causal_decay;
    }
    for (double& v : w) v /= total;
    return w;
}

std::vector<double> LinearBackend::noise_direction(std::uint64_t noise_seed) const {
    SplitMix64 rng(mix_seed(p_.seed, noise_seed));
    std::vector<double> eps(p_.channels);
    for (double& e : eps) e = rng.symmetric();
    return eps;
}

Latent LinearBackend::do_encode(const MotionSequence& window) const {
    const std::size_t d = p_.frame_width;
    const std::size_t n = window.size();
    const std::size_t offset = p_.max_window - n;
    Latent z({p_.tokens, p_.channels});
    std::vector<double> sum(d);
    std::size_t i = 0;
    // Slots are visited in order, so each token's slots form one contiguous run.
    while (i < n) {
        const std::size_t k = token_of_slot(offset + i);
        std::fill(sum.begin(), sum.end(), 0.0);
        std::size_t count = 0;
        for (; i < n && token_of_slot(offset + i) == k; ++i, ++count) {
            const auto f = window.frame(i);
            for (std::size_t c = 0; c < d; ++c) sum[c] += f[c];
        }
        if (count > 1) {
            for (double& v : sum) v /= static_cast<double>(count);
        }
        p_.encoder.apply(sum, z.token(k));
    }
    return z;
}

MotionSequence LinearBackend::decode_slots(const Latent& z, std::size_t first_slot) const {
    const std::size_t d = p_.frame_width;
    const std::size_t total = p_.max_window;
    const std::size_t h = (p_.decoder_kernel.size() - 1) / 2;
    // Slots whose base value the kernel may read.
    const std::size_t lo = first_slot >= h ? first_slot - h : 0;
    std::vector<double> base((total - lo) * d);
    std::size_t cached_token = static_cast<std::size_t>(-1);
    for (std::size_t s = lo; s < total; ++s) {
        const std::size_t k = token_of_slot(s);
        auto dst = std::span<double>(base).subspan((s - lo) * d, d);
        if (k == cached_token) {
            auto prev = std::span<const double>(base).subspan((s - 1 - lo) * d, d);
            std::copy(prev.begin(), prev.end(), dst.begin());
        } else {
            p_.decoder.apply(z.token(k), dst);
            cached_token = k;
        }
    }
    std::vector<double> out((total - first_slot) * d);
    if (plain_kernel_) {
        std::copy(base.begin() + static_cast<std::ptrdiff_t>((first_slot - lo) * d), base.end(), out.begin());
    } else {
        const auto& kernel = p_.decoder_kernel;
        for (std::size_t s = first_slot; s < total; ++s) {
            double* dst = out.data() + (s - first_slot) * d;
            for (std::size_t r = 0; r < kernel.size(); ++r) {
                const std::ptrdiff_t src = std::clamp<std::ptrdiff_t>(
                    static_cast<std::ptrdiff_t>(s + r) - static_cast<std::ptrdiff_t>(h),
                    static_cast<std::ptrdiff_t>(lo), static_cast<std::ptrdiff_t>(total - 1));
                const double* b = base.data() + (static_cast<std::size_t>(src) - lo) * d;
                for (std::size_t c = 0; c < d; ++c) dst[c] += kernel[r] * b[c];
            }
        }
    }
    return MotionSequence(d, std::move(out));
}

MotionSequence LinearBackend::do_decode(const Latent& z) const { return decode_slots(z, 0); }

MotionSequence LinearBackend::do_decode_tail(const Latent& z, std::size_t count) const {
    return decode_slots(z, p_.max_window - count);
}

Latent LinearBackend::do_denoise(const Latent& z, const Conditioning& /*cond*/, const StyleEmbedding& style,
                                 const DenoiseOptions& opts) const {
    std::vector<double> offset(p_.channels, 0.0);
    p_.style_proj.apply(style.vec, offset);
    if (p_.noise > 0.0) {
        const auto eps = noise_direction(opts.noise_seed);
        for (std::size_t c = 0; c < p_.channels; ++c) offset[c] += p_.noise * eps[c];
    }
    Latent out(z.shape());
    for (std::size_t k = 0; k < p_.tokens; ++k) {
        const auto src = z.token(k);
        auto dst = out.token(k);
        for (std::size_t c = 0; c < p_.channels; ++c) dst[c] = src[c] + offset[c];
    }
    if (p_.denoise_work > 0) {
        std::vector<double> scratch(p_.channels);
        for (int step = 0; step < opts.steps; ++step) {
            for (int pass = 0; pass < p_.denoise_work; ++pass) {
                for (std::size_t k = 0; k < p_.tokens; ++k) {
                    p_.mixing.apply(out.token(k), scratch);
                    keep_alive(scratch.data());
                    keep_alive(scratch[0]);
                }
            }
        }
    }
    return out;
}

MotionSequence LinearBackend::do_causal_decode(std::span<const Latent> buffer, std::size_t out_len) const {
    const auto w = causal_weights(buffer.size());
    Latent mixed(buffer.front().shape());
    auto acc = mixed.data();
    for (std::size_t i = 0; i < buffer.size(); ++i) {
        if (w[i] == 0.0) continue;
        const auto src = buffer[i].data();
        for (std::size_t e = 0; e < acc.size(); ++e) acc[e] += w[i] * src[e];
    }
    const std::size_t d = p_.frame_width;
    const std::size_t first = p_.max_window - out_len;
    std::vector<double> out(out_len * d);
    std::size_t cached_token = static_cast<std::size_t>(-1);
    for (std::size_t s = first; s < p_.max_window; ++s) {
        const std::size_t k = token_of_slot(s);
        auto dst = std::span<double>(out).subspan((s - first) * d, d);
        if (s > first && k == cached_token) {
            std::copy_n(out.begin() + static_cast<std::ptrdiff_t>((s - 1 - first) * d), d, dst.begin());
        } else {
            p_.decoder.apply(mixed.token(k), dst);
            cached_token = k;
        }
    }
    return MotionSequence(d, std::move(out));
}

JointSequence LinearBackend::do_features_to_joints(const MotionSequence& seq) const {
    const std::size_t width = 3 * p_.joint_count;
    std::vector<double> out(seq.size() * width);
    for (std::size_t t = 0; t < seq.size(); ++t) {
        p_.joint_map.apply(seq.frame(t), std::span<double>(out).subspan(t * width, width));
    }
    return JointSequence(p_.joint_count, std::move(out), seq.fps());
}

StyleEmbedding LinearBackend::do_style_embed(const MotionSequence& style_motion) const {
    const std::size_t d = p_.frame_width;
    std::vector<double> mean(d, 0.0);
    for (std::size_t t = 0; t < style_motion.size(); ++t) {
        const auto f = style_motion.frame(t);
        for (std::size_t c = 0; c < d; ++c) mean[c] += f[c];
    }
    for (double& v : mean) v /= static_cast<double>(style_motion.size());
    StyleEmbedding s;
    s.vec.assign(p_.style_dim, 0.0);
    p_.style_embed_proj.apply(mean, s.vec);
    return s;
}

std::shared_ptr<const LinearBackend> make_toy_backend(const ToyOptions& opts) {
    return std::make_shared<const LinearBackend>(generate_toy_params(opts));
}

std::shared_ptr<const LinearBackend> make_identity_backend(std::size_t frame_width, std::size_t joint_count,
                                                           std::size_t max_window) {
    return std::make_shared<const LinearBackend>(identity_params(frame_width, joint_count, max_window));
}

}  // namespace mstream
