#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mstream/motion.hpp"

namespace mstream {

// Pooled jitter: D sums ||x_{t+1,j} - 2 x_{t,j} + x_{t-1,j}||_2 over interior
// frames and joints, N counts those terms, jitter = D / N.
struct JitterTerms {
    double d_sum = 0.0;
    std::size_t n_count = 0;
};

struct JitterReport {
    double d_sum = 0.0;
    std::size_t n_count = 0;
    double jitter = 0.0;
};

// (D, N) of one sequence; (0, 0) when it has fewer than 3 frames.
JitterTerms sequence_jitter_terms(const JointSequence& seq);

// sum D / sum N over every sequence (not the mean of per-sequence ratios).
// Throws MetricError when no sequence has 3 or more frames.
JitterReport total_jitter(std::span<const JointSequence> sequences);
JitterReport total_jitter(std::span<const JitterTerms> terms);

// Incremental form for streams: feed frames as they are emitted.
class JitterAccumulator {
public:
    explicit JitterAccumulator(std::size_t joint_count) : joint_count_(joint_count) {}

    void add_frame(std::span<const double> frame);
    void add(const JointSequence& seq);
    JitterTerms terms() const noexcept { return terms_; }
    std::size_t frames() const noexcept { return frames_; }

private:
    std::size_t joint_count_;
    std::size_t frames_ = 0;
    std::vector<double> prev2_;
    std::vector<double> prev1_;
    JitterTerms terms_;
};

// Mean joint displacement across the given boundaries minus the mean
// within-segment displacement, floored at zero. Displacement between frames
// t-1 and t is the mean over joints of ||x_t - x_{t-1}||. Boundary b sits
// between frames b-1 and b and must lie in [1, T-1].
double boundary_discontinuity(const JointSequence& seq, std::span<const std::size_t> boundaries);

struct LossWeights {
    double traj = 2.0;
    double feat = 1.0;
    double joints = 1.0;
    double smooth_traj = 0.1;
    double smooth_joints = 0.1;
};

// Flattened tensors for the five reconstruction terms.
struct LossInputs {
    std::vector<double> traj;
    std::vector<double> feat;
    std::vector<double> joints;
    std::vector<double> dtraj;
    std::vector<double> djoints;
};

struct LossTerms {
    double traj = 0.0;
    double feat = 0.0;
    double joints = 0.0;
    double smooth_traj = 0.0;
    double smooth_joints = 0.0;
};

struct LossResult {
    double total = 0.0;
    LossTerms terms;
};

// Each term is the mean absolute elementwise error of its pair; total is the
// weighted sum. Throws DimensionError on mismatched sizes.
LossResult vae_loss(const LossInputs& pred, const LossInputs& target, const LossWeights& weights = {});

// First-order frame differences of a row-major frames x width block:
// (frames - 1) x width values, row t = x_{t+1} - x_t.
std::vector<double> first_difference(std::span<const double> values, std::size_t width);

// Builds LossInputs from a feature sequence and its joints.
LossInputs loss_inputs(const MotionSequence& features, const JointSequence& joints);

}  // namespace mstream
