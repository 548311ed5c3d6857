#include "mstream/latent.hpp"

#include <cmath>
#include <string>

#include "mstream/errors.hpp"

namespace mstream {

Latent::Latent(LatentShape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.numel()) {
        throw DimensionError("latent data has " + std::to_string(data_.size()) + " entries, shape needs " +
                             std::to_string(shape_.numel()));
    }
}

bool Latent::all_finite() const noexcept {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Latent blend(const Latent& z_new, const Latent& z_recent, double alpha) {
    if (!(z_new.shape() == z_recent.shape())) throw DimensionError("blend: latent shape mismatch");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ArgumentError("blend: alpha must lie in [0, 1]");
    const double keep = 1.0 - alpha;
    Latent out(z_new.shape());
    auto dst = out.data();
    const auto a = z_new.data();
    const auto b = z_recent.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = alpha * a[i] + keep * b[i];
    return out;
}

}  // namespace mstream
