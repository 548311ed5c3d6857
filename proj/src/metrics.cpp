#include "mstream/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mstream/errors.hpp"

namespace mstream {

namespace {

double second_diff_norm(const double* prev, const double* cur, const double* next) {
    double sq = 0.0;
    for (int k = 0; k < 3; ++k) {
        const double a = next[k] - 2.0 * cur[k] + prev[k];
        sq += a * a;
    }
    return std::sqrt(sq);
}

double mean_displacement(std::span<const double> a, std::span<const double> b, std::size_t joints) {
    double total = 0.0;
    for (std::size_t j = 0; j < joints; ++j) {
        double sq = 0.0;
        for (int k = 0; k < 3; ++k) {
            const double v = b[3 * j + k] - a[3 * j + k];
            sq += v * v;
        }
        total += std::sqrt(sq);
    }
    return total / static_cast<double>(joints);
}

double mean_abs_error(const std::vector<double>& pred, const std::vector<double>& target, const char* name) {
    if (pred.size() != target.size()) {
        throw DimensionError(std::string("vae_loss: ") + name + " size mismatch (" + std::to_string(pred.size()) +
                             " vs " + std::to_string(target.size()) + ")");
    }
    if (pred.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(pred[i] - target[i]);
    return sum / static_cast<double>(pred.size());
}

}  // namespace

JitterTerms sequence_jitter_terms(const JointSequence& seq) {
    JitterTerms terms;
    const std::size_t frames = seq.size();
    if (frames < 3) return terms;
    const std::size_t joints = seq.joint_count();
    for (std::size_t t = 1; t + 1 < frames; ++t) {
        const double* prev = seq.frame(t - 1).data();
        const double* cur = seq.frame(t).data();
        const double* next = seq.frame(t + 1).data();
        for (std::size_t j = 0; j < joints; ++j) {
            terms.d_sum += second_diff_norm(prev + 3 * j, cur + 3 * j, next + 3 * j);
        }
    }
    terms.n_count = (frames - 2) * joints;
    return terms;
}

JitterReport total_jitter(std::span<const JitterTerms> terms) {
    JitterReport report;
    for (const auto& t : terms) {
        report.d_sum += t.d_sum;
        report.n_count += t.n_count;
    }
    if (report.n_count == 0) throw MetricError("total jitter is undefined: every sequence has fewer than 3 frames");
    report.jitter = report.d_sum / static_cast<double>(report.n_count);
    return report;
}

JitterReport total_jitter(std::span<const JointSequence> sequences) {
    std::vector<JitterTerms> terms;
    terms.reserve(sequences.size());
    for (const auto& s : sequences) terms.push_back(sequence_jitter_terms(s));
    return total_jitter(std::span<const JitterTerms>(terms));
}

void JitterAccumulator::add_frame(std::span<const double> frame) {
    if (frame.size() != 3 * joint_count_) throw DimensionError("jitter accumulator: joint frame width mismatch");
    if (frames_ >= 2) {
        for (std::size_t j = 0; j < joint_count_; ++j) {
            terms_.d_sum += second_diff_norm(prev2_.data() + 3 * j, prev1_.data() + 3 * j, frame.data() + 3 * j);
        }
        terms_.n_count += joint_count_;
    }
    prev2_ = std::move(prev1_);
    prev1_.assign(frame.begin(), frame.end());
    ++frames_;
}

void JitterAccumulator::add(const JointSequence& seq) {
    for (std::size_t t = 0; t < seq.size(); ++t) add_frame(seq.frame(t));
}

double boundary_discontinuity(const JointSequence& seq, std::span<const std::size_t> boundaries) {
    const std::size_t frames = seq.size();
    for (std::size_t b : boundaries) {
        if (b < 1 || b + 1 > frames) {
            throw BoundsError("boundary " + std::to_string(b) + " outside [1, " +
                              std::to_string(frames == 0 ? 0 : frames - 1) + "]");
        }
    }
    if (boundaries.empty()) return 0.0;
    std::vector<bool> is_boundary(frames, false);
    for (std::size_t b : boundaries) is_boundary[b] = true;

    const std::size_t joints = seq.joint_count();
    double across = 0.0;
    std::size_t across_n = 0;
    double within = 0.0;
    std::size_t within_n = 0;
    for (std::size_t t = 1; t < frames; ++t) {
        const double disp = mean_displacement(seq.frame(t - 1), seq.frame(t), joints);
        if (is_boundary[t]) {
            across += disp;
            ++across_n;
        } else {
            within += disp;
            ++within_n;
        }
    }
    const double mean_across = across / static_cast<double>(across_n);
    const double mean_within = within_n == 0 ? 0.0 : within / static_cast<double>(within_n);
    return std::max(0.0, mean_across - mean_within);
}

LossResult vae_loss(const LossInputs& pred, const LossInputs& target, const LossWeights& w) {
    LossResult r;
    r.terms.traj = mean_abs_error(pred.traj, target.traj, "traj");
    r.terms.feat = mean_abs_error(pred.feat, target.feat, "feat");
    r.terms.joints = mean_abs_error(pred.joints, target.joints, "joints");
    r.terms.smooth_traj = mean_abs_error(pred.dtraj, target.dtraj, "dtraj");
    r.terms.smooth_joints = mean_abs_error(pred.djoints, target.djoints, "djoints");
    r.total = w.traj * r.terms.traj + w.feat * r.terms.feat + w.joints * r.terms.joints +
              w.smooth_traj * r.terms.smooth_traj + w.smooth_joints * r.terms.smooth_joints;
    return r;
}

std::vector<double> first_difference(std::span<const double> values, std::size_t width) {
    if (width == 0 || values.size() % width != 0) throw DimensionError("first_difference: bad width");
    const std::size_t frames = values.size() / width;
    std::vector<double> out;
    if (frames < 2) return out;
    out.reserve((frames - 1) * width);
    for (std::size_t t = 0; t + 1 < frames; ++t) {
        for (std::size_t c = 0; c < width; ++c) out.push_back(values[(t + 1) * width + c] - values[t * width + c]);
    }
    return out;
}

LossInputs loss_inputs(const MotionSequence& features, const JointSequence& joints) {
    if (features.size() != joints.size()) throw DimensionError("loss_inputs: frame count mismatch");
    LossInputs in;
    for (std::size_t t = 0; t < features.size(); ++t) {
        const auto f = features.frame(t);
        in.traj.insert(in.traj.end(), f.begin(), f.begin() + kTrajectoryDims);
        in.feat.insert(in.feat.end(), f.begin() + kTrajectoryDims, f.end());
    }
    in.joints.assign(joints.data().begin(), joints.data().end());
    in.dtraj = first_difference(in.traj, kTrajectoryDims);
    in.djoints = first_difference(in.joints, 3 * joints.joint_count());
    return in;
}

}  // namespace mstream
