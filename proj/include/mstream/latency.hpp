#pragma once

#include <cstddef>
#include <vector>

namespace mstream {

// Collected latency samples in milliseconds.
class LatencyStats {
public:
    void add(double ms) { samples_.push_back(ms); }
    std::size_t count() const noexcept { return samples_.size(); }
    bool empty() const noexcept { return samples_.empty(); }
    const std::vector<double>& samples() const noexcept { return samples_; }

    double mean() const;
    double min() const;
    double max() const;
    // Population standard deviation.
    double stddev() const;
    // Nearest-rank percentile, p in [0, 100]. 0 when empty.
    double percentile(double p) const;

private:
    std::vector<double> samples_;
};

}  // namespace mstream
