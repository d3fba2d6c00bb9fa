#pragma once

#include <array>
#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "sqr/error.hpp"

namespace sqr {

/// Allocator returning 64-byte aligned storage. Vectorized kernels pick their
/// reduction order from the data alignment, so aligned buffers keep results
/// identical from run to run.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t kAlignment{64};

    AlignedAllocator() noexcept = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlignment)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlignment); }

    template <typename U>
    friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) noexcept {
        return true;
    }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// Dense NCHW tensor with contiguous storage.
template <typename T>
class Tensor {
public:
    using Shape = std::array<std::size_t, 4>;

    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T{})
        : shape_(shape), data_(shape[0] * shape[1] * shape[2] * shape[3], fill) {}
    Tensor(Shape shape, std::span<const T> data) : shape_(shape), data_(data.begin(), data.end()) {
        if (data_.size() != shape[0] * shape[1] * shape[2] * shape[3]) {
            throw ShapeError("tensor data size does not match its shape");
        }
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t batch() const noexcept { return shape_[0]; }
    std::size_t channels() const noexcept { return shape_[1]; }
    std::size_t height() const noexcept { return shape_[2]; }
    std::size_t width() const noexcept { return shape_[3]; }
    std::size_t size() const noexcept { return data_.size(); }
    /// Elements per batch entry.
    std::size_t stride() const noexcept { return shape_[1] * shape_[2] * shape_[3]; }

    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }
    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }

    T* sample(std::size_t n) noexcept { return data_.data() + n * stride(); }
    const T* sample(std::size_t n) const noexcept { return data_.data() + n * stride(); }

    T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) noexcept {
        return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }
    const T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
        return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }

    void reshape(Shape shape) {
        if (shape[0] * shape[1] * shape[2] * shape[3] != data_.size()) {
            throw ShapeError("reshape changes element count");
        }
        shape_ = shape;
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_{0, 0, 0, 0};
    AlignedVector<T> data_;
};

inline std::string shape_string(const std::array<std::size_t, 4>& s) {
    return "(" + std::to_string(s[0]) + "," + std::to_string(s[1]) + "," + std::to_string(s[2]) + "," +
           std::to_string(s[3]) + ")";
}

}  // namespace sqr
