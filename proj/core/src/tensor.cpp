#include "dnirb/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dnirb/errors.hpp"

namespace dnirb {

std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << "(" << s.n << "," << s.c << "," << s.h << "," << s.w << ")";
  return os.str();
}

void check_shape(const Shape& s) {
  if (s.n == 0 || s.c == 0 || s.h == 0 || s.w == 0) {
    throw ShapeError("tensor dimensions must all be >= 1, got " +
                     to_string(s));
  }
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape) {
  check_shape(shape_);
  data_.assign(shape_.numel(), fill);
}

Tensor::Tensor(Shape shape, const std::vector<double>& data)
    : shape_(shape), data_(data.begin(), data.end()) {
  check_shape(shape_);
  if (data_.size() != shape_.numel()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + to_string(shape_));
  }
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Tensor slice_batch(const Tensor& t, std::size_t first, std::size_t count) {
  const Shape& s = t.shape();
  if (count == 0 || first + count > s.n) {
    throw ShapeError("batch slice [" + std::to_string(first) + ", " +
                     std::to_string(first + count) + ") out of range for " +
                     to_string(s));
  }
  Tensor out(Shape{count, s.c, s.h, s.w});
  std::copy_n(t.raw() + first * s.sample(), count * s.sample(), out.raw());
  return out;
}

Tensor stack_batch(std::span<const Tensor> items) {
  if (items.empty()) throw ShapeError("cannot stack an empty tensor list");
  Shape s = items.front().shape();
  std::size_t total = 0;
  for (const Tensor& t : items) {
    const Shape& u = t.shape();
    if (u.c != s.c || u.h != s.h || u.w != s.w) {
      throw ShapeError("stack_batch: shape " + to_string(u) +
                       " disagrees with " + to_string(s));
    }
    total += u.n;
  }
  s.n = total;
  Tensor out(s);
  double* dst = out.raw();
  for (const Tensor& t : items) dst = std::copy(t.raw(), t.raw() + t.size(), dst);
  return out;
}

}  // namespace dnirb
