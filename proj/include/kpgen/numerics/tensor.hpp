#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace kpgen {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }
  std::size_t rank() const { return shape_.size(); }
  // Rows/cols of a matrix; a vector is treated as a single column.
  std::size_t rows() const { return shape_.empty() ? 1 : shape_[0]; }
  std::size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool on) { requires_grad_ = on; }

  void fill(double v);
  bool all_finite() const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  Shape shape_;
  std::vector<double> values_;
  bool requires_grad_ = false;
};

/// Named collection of learnable tensors, addressed by slot index.
class ParamStore {
 public:
  std::size_t add(std::string name, Tensor value);

  std::size_t size() const { return tensors_.size(); }
  const std::string& name(std::size_t slot) const { return names_.at(slot); }
  Tensor& operator[](std::size_t slot) { return tensors_[slot]; }
  const Tensor& operator[](std::size_t slot) const { return tensors_[slot]; }
  // Throws UsageError for unknown names.
  std::size_t slot(const std::string& name) const;

  std::size_t parameter_count() const;
  // Zero tensors with matching shapes; the layout used for gradients and
  // optimizer accumulators.
  std::vector<Tensor> zeros_like() const;

  friend bool operator==(const ParamStore& a, const ParamStore& b) {
    return a.names_ == b.names_ && a.tensors_ == b.tensors_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
};

using Gradients = std::vector<Tensor>;

void zero_gradients(Gradients& grads);
// dst += src, slot by slot.
void accumulate(Gradients& dst, const Gradients& src);
double global_norm(const Gradients& grads);

}  // namespace kpgen
