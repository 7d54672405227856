#pragma once

#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace dnirb {

/// Extent of a 4-D tensor in (batch, channel, row, column) order.
struct Shape {
  std::size_t n = 1;
  std::size_t c = 1;
  std::size_t h = 1;
  std::size_t w = 1;

  std::size_t numel() const { return n * c * h * w; }
  std::size_t plane() const { return h * w; }
  /// Elements in one batch item.
  std::size_t sample() const { return c * h * w; }

  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

/// Allocator with a fixed 64-byte alignment. Vectorised kernels choose
/// their peeling by pointer alignment, so a fixed alignment keeps
/// floating-point results independent of where the heap places a buffer.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), kAlignment));
  }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlignment); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

using AlignedBuffer = std::vector<double, AlignedAllocator<double>>;

/// Dense row-major (n, c, h, w) tensor of doubles. Every dimension is at
/// least one; constructing an empty tensor throws ShapeError.
class Tensor {
 public:
  Tensor() : Tensor(Shape{}) {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, const std::vector<double>& data);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* raw() { return data_.data(); }
  const double* raw() const { return data_.data(); }

  std::size_t offset(std::size_t n, std::size_t c, std::size_t h,
                     std::size_t w) const {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[offset(n, c, h, w)];
  }
  double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[offset(n, c, h, w)];
  }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// View of batch item `n` as a contiguous (c*h*w) span.
  std::span<double> sample(std::size_t n) {
    return std::span<double>(data_).subspan(n * shape_.sample(),
                                            shape_.sample());
  }
  std::span<const double> sample(std::size_t n) const {
    return std::span<const double>(data_).subspan(n * shape_.sample(),
                                                  shape_.sample());
  }

  void fill(double v);
  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  AlignedBuffer data_;
};

void check_shape(const Shape& s);

/// Copies batch items [first, first + count) into a new tensor.
Tensor slice_batch(const Tensor& t, std::size_t first, std::size_t count);

/// Stacks single-sample tensors of equal (c, h, w) along the batch axis.
Tensor stack_batch(std::span<const Tensor> items);

}  // namespace dnirb
