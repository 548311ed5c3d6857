#include "mstream/frame_log.hpp"

#include <algorithm>
#include <string>

#include "mstream/errors.hpp"

namespace mstream {

std::span<const double> FrameLog::at(std::size_t index) const {
    if (index < base_ || index >= end_index()) {
        throw BoundsError("frame " + std::to_string(index) + " not retained (live range [" +
                          std::to_string(base_) + ", " + std::to_string(end_index()) + "))");
    }
    return std::span<const double>(data_).subspan((head_ + index - base_) * width_, width_);
}

std::span<double> FrameLog::at(std::size_t index) {
    if (index < base_ || index >= end_index()) {
        throw BoundsError("frame " + std::to_string(index) + " not retained");
    }
    return std::span<double>(data_).subspan((head_ + index - base_) * width_, width_);
}

void FrameLog::append(std::span<const double> row) {
    if (row.size() != width_) throw DimensionError("frame log: row width mismatch");
    data_.insert(data_.end(), row.begin(), row.end());
}

void FrameLog::drop_before(std::size_t index) {
    if (index <= base_) return;
    const std::size_t n = std::min(index, end_index()) - base_;
    head_ += n;
    base_ += n;
    if (head_ > live()) {
        data_.erase(data_.begin(), data_.begin() + static_cast<std::ptrdiff_t>(head_ * width_));
        head_ = 0;
    }
}

void FrameLog::keep_last(std::size_t rows) {
    if (live() > rows) drop_before(end_index() - rows);
}

std::vector<double> FrameLog::copy_range(std::size_t begin, std::size_t end) const {
    std::vector<double> out;
    if (begin >= end) return out;
    at(begin);
    at(end - 1);
    const auto first = data_.begin() + static_cast<std::ptrdiff_t>((head_ + begin - base_) * width_);
    out.assign(first, first + static_cast<std::ptrdiff_t>((end - begin) * width_));
    return out;
}

}  // namespace mstream
