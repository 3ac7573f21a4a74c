#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace latim {

template <class T>
using matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <class T>
using row_map = Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>;
template <class T>
using const_row_map = Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>;

using index_t = Eigen::Index;

// Dense row-major rank-3 array. Element (a, b, c) lives at (a * d1 + b) * d2 + c.
template <class T>
class tensor3 {
public:
    tensor3() = default;
    tensor3(index_t d0, index_t d1, index_t d2)
        : d0_(d0), d1_(d1), d2_(d2), data_(static_cast<std::size_t>(d0 * d1 * d2), T(0)) {}

    index_t dim0() const noexcept { return d0_; }
    index_t dim1() const noexcept { return d1_; }
    index_t dim2() const noexcept { return d2_; }
    std::size_t size() const noexcept { return data_.size(); }

    T& operator()(index_t a, index_t b, index_t c) { return data_[offset(a, b, c)]; }
    const T& operator()(index_t a, index_t b, index_t c) const { return data_[offset(a, b, c)]; }

    // Contiguous fiber over the last axis.
    row_map<T> fiber(index_t a, index_t b) { return row_map<T>(data_.data() + offset(a, b, 0), d2_); }
    const_row_map<T> fiber(index_t a, index_t b) const {
        return const_row_map<T>(data_.data() + offset(a, b, 0), d2_);
    }

    std::span<T> flat() noexcept { return data_; }
    std::span<const T> flat() const noexcept { return data_; }

    template <class U>
    tensor3<U> cast() const {
        tensor3<U> out(d0_, d1_, d2_);
        for (std::size_t k = 0; k < data_.size(); ++k) out.flat()[k] = static_cast<U>(data_[k]);
        return out;
    }

private:
    std::size_t offset(index_t a, index_t b, index_t c) const noexcept {
        return static_cast<std::size_t>((a * d1_ + b) * d2_ + c);
    }

    index_t d0_ = 0, d1_ = 0, d2_ = 0;
    std::vector<T> data_;
};

} // namespace latim
