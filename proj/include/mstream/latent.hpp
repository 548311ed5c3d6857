#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace mstream {

struct LatentShape {
    std::size_t tokens = 0;
    std::size_t channels = 0;

    std::size_t numel() const noexcept { return tokens * channels; }
    friend bool operator==(const LatentShape&, const LatentShape&) = default;
};

// Dense tokens x channels tensor, row-major by token.
class Latent {
public:
    Latent() = default;
    explicit Latent(LatentShape shape) : shape_(shape), data_(shape.numel(), 0.0) {}
    Latent(LatentShape shape, std::vector<double> data);

    const LatentShape& shape() const noexcept { return shape_; }
    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    std::span<const double> token(std::size_t k) const {
        return std::span<const double>(data_).subspan(k * shape_.channels, shape_.channels);
    }
    std::span<double> token(std::size_t k) {
        return std::span<double>(data_).subspan(k * shape_.channels, shape_.channels);
    }

    double& at(std::size_t k, std::size_t c) { return data_[k * shape_.channels + c]; }
    double at(std::size_t k, std::size_t c) const { return data_[k * shape_.channels + c]; }

    bool all_finite() const noexcept;

    friend bool operator==(const Latent& a, const Latent& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    LatentShape shape_;
    std::vector<double> data_;
};

// z_cur = alpha * z_new + (1 - alpha) * z_recent, elementwise.
Latent blend(const Latent& z_new, const Latent& z_recent, double alpha);

// Opaque conditioning vector for the denoiser.
struct StyleEmbedding {
    std::vector<double> vec;
    std::string label;
};

}  // namespace mstream
