#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kpgen/numerics/tensor.hpp"

namespace kpgen {

/// Handle to a value recorded on a Tape.
struct Var {
  std::uint32_t id = 0;
};

class Tape;

// Reads the node's output gradient and adds into the input gradients.
using BackwardFn = std::function<void(Tape&, std::uint32_t self)>;

/// Records primitive operations in execution order for reverse-mode
/// differentiation. A tape is confined to one thread.
///
/// Parameters enter through param(); their gradients are accumulated into a
/// caller-owned Gradients set on backward(). Everything else lives on the tape.
class Tape {
 public:
  Var input(Tensor value);
  Var param(const ParamStore& store, std::size_t slot);

  std::span<const double> value(Var v) const;
  const Shape& shape(Var v) const { return nodes_[v.id].shape; }
  std::size_t size_of(Var v) const { return value(v).size(); }
  Tensor tensor(Var v) const;
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }

  // Gradient buffer of a node, allocated (zeroed) on first access.
  std::span<double> grad(Var v);
  bool has_grad(Var v) const;

  /// Runs the recorded operations in reverse order, seeding d(loss)/d(loss)=1.
  /// Parameter gradients are added into `grads` (not overwritten).
  void backward(Var loss, Gradients& grads);

  // Appends a node. `inputs` drive needs_grad; `fn` is dropped when no input
  // needs a gradient. Throws NumericError if `value` holds NaN/Inf.
  Var record(std::string_view op, Shape shape, std::vector<double> value,
             std::vector<Var> inputs, BackwardFn fn);

  std::size_t node_count() const { return nodes_.size(); }
  std::string_view op_name(Var v) const { return nodes_[v.id].op; }

  // Truncation points, used by decoding to discard per-step nodes.
  std::size_t mark() const { return nodes_.size(); }
  void rewind(std::size_t mark);

 private:
  struct Node {
    std::string_view op;
    Shape shape;
    std::vector<double> value;
    const Tensor* external = nullptr;
    std::size_t param_slot = 0;
    std::vector<double> grad;
    double* grad_external = nullptr;
    bool needs_grad = false;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const ParamStore*, std::unordered_map<std::size_t, std::uint32_t>>
      param_nodes_;
};

}  // namespace kpgen
