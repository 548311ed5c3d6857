#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mstream {

// Append-only store of fixed-width rows addressed by a global index. The head
// can be dropped to bound memory; dropped rows are compacted lazily so append
// and drop are amortized O(width).
class FrameLog {
public:
    explicit FrameLog(std::size_t width) : width_(width) {}

    std::size_t width() const noexcept { return width_; }
    std::size_t begin_index() const noexcept { return base_; }
    std::size_t end_index() const noexcept { return base_ + live(); }
    std::size_t live() const noexcept { return data_.size() / width_ - head_; }

    std::span<const double> at(std::size_t index) const;
    std::span<double> at(std::size_t index);

    void append(std::span<const double> row);
    // Drops every row with index < `index`.
    void drop_before(std::size_t index);
    // Keeps at most `rows` trailing rows.
    void keep_last(std::size_t rows);

    // Rows [begin, end) copied out contiguously.
    std::vector<double> copy_range(std::size_t begin, std::size_t end) const;

private:
    std::size_t width_;
    std::size_t base_ = 0;  // global index of the first live row
    std::size_t head_ = 0;  // dead rows at the front of data_
    std::vector<double> data_;
};

}  // namespace mstream
