#include "kpgen/numerics/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "kpgen/errors.hpp"

namespace kpgen {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (shape_size(shape_) != values_.size()) {
    throw ConfigError("tensor shape " + shape_string(shape_) + " does not match " +
                      std::to_string(values_.size()) + " values");
  }
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

std::size_t ParamStore::add(std::string name, Tensor value) {
  if (std::find(names_.begin(), names_.end(), name) != names_.end()) {
    throw ConfigError("duplicate parameter name: " + name);
  }
  value.set_requires_grad(true);
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(value));
  return tensors_.size() - 1;
}

std::size_t ParamStore::slot(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw UsageError("unknown parameter: " + name);
  return static_cast<std::size_t>(it - names_.begin());
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

std::vector<Tensor> ParamStore::zeros_like() const {
  std::vector<Tensor> out;
  out.reserve(tensors_.size());
  for (const auto& t : tensors_) out.emplace_back(t.shape(), 0.0);
  return out;
}

void zero_gradients(Gradients& grads) {
  for (auto& g : grads) g.fill(0.0);
}

void accumulate(Gradients& dst, const Gradients& src) {
  if (dst.size() != src.size()) throw ConfigError("gradient sets differ in slot count");
  for (std::size_t s = 0; s < dst.size(); ++s) {
    if (dst[s].shape() != src[s].shape()) {
      throw ConfigError("gradient shape mismatch in slot " + std::to_string(s));
    }
    auto d = dst[s].values();
    auto v = src[s].values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += v[i];
  }
}

double global_norm(const Gradients& grads) {
  double sq = 0.0;
  for (const auto& g : grads) {
    for (double v : g.values()) sq += v * v;
  }
  return std::sqrt(sq);
}

}  // namespace kpgen
