#include "mstream/latency.hpp"

#include <algorithm>
#include <cmath>

#include "mstream/errors.hpp"

namespace mstream {

double LatencyStats::mean() const {
    if (samples_.empty()) return 0.0;
    double sum = 0.0;
    for (double v : samples_) sum += v;
    return sum / static_cast<double>(samples_.size());
}

double LatencyStats::min() const {
    return samples_.empty() ? 0.0 : *std::min_element(samples_.begin(), samples_.end());
}

double LatencyStats::max() const {
    return samples_.empty() ? 0.0 : *std::max_element(samples_.begin(), samples_.end());
}

double LatencyStats::stddev() const {
    if (samples_.empty()) return 0.0;
    const double m = mean();
    double sq = 0.0;
    for (double v : samples_) sq += (v - m) * (v - m);
    return std::sqrt(sq / static_cast<double>(samples_.size()));
}

double LatencyStats::percentile(double p) const {
    if (!(p >= 0.0 && p <= 100.0)) throw ArgumentError("percentile must lie in [0, 100]");
    if (samples_.empty()) return 0.0;
    std::vector<double> sorted = samples_;
    std::sort(sorted.begin(), sorted.end());
    const auto n = sorted.size();
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
    if (rank == 0) rank = 1;
    return sorted[rank - 1];
}

}  // namespace mstream
