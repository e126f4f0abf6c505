#include "kpgen/numerics/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kpgen/errors.hpp"

namespace kpgen {

namespace {

bool finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

Var Tape::input(Tensor value) {
  Node node;
  node.op = "input";
  node.shape = value.shape();
  if (!value.all_finite()) throw NumericError("non-finite value in tape input");
  std::vector<double> values(value.values().begin(), value.values().end());
  node.value = std::move(values);
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::param(const ParamStore& store, std::size_t slot) {
  auto& by_slot = param_nodes_[&store];
  if (auto it = by_slot.find(slot); it != by_slot.end()) return Var{it->second};
  Node node;
  node.op = "param";
  node.shape = store[slot].shape();
  node.external = &store[slot];
  node.param_slot = slot;
  node.needs_grad = true;
  nodes_.push_back(std::move(node));
  auto id = static_cast<std::uint32_t>(nodes_.size() - 1);
  by_slot.emplace(slot, id);
  return Var{id};
}

std::span<const double> Tape::value(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.external) return n.external->values();
  return n.value;
}

Tensor Tape::tensor(Var v) const {
  auto vals = value(v);
  return Tensor(shape(v), std::vector<double>(vals.begin(), vals.end()));
}

std::span<double> Tape::grad(Var v) {
  Node& n = nodes_.at(v.id);
  if (n.grad_external) return {n.grad_external, shape_size(n.shape)};
  if (n.grad.empty()) n.grad.assign(shape_size(n.shape), 0.0);
  return n.grad;
}

bool Tape::has_grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  return n.grad_external != nullptr || !n.grad.empty();
}

Var Tape::record(std::string_view op, Shape shape, std::vector<double> value,
                 std::vector<Var> inputs, BackwardFn fn) {
  if (shape_size(shape) != value.size()) {
    throw ConfigError(std::string(op) + ": shape " + shape_string(shape) +
                      " does not match value count");
  }
  if (!finite(value)) {
    throw NumericError(std::string(op) + ": non-finite value in forward pass");
  }
  Node node;
  node.op = op;
  node.shape = std::move(shape);
  node.value = std::move(value);
  node.needs_grad = std::any_of(inputs.begin(), inputs.end(),
                                [&](Var in) { return nodes_.at(in.id).needs_grad; });
  if (node.needs_grad) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

void Tape::rewind(std::size_t mark) {
  if (mark > nodes_.size()) throw UsageError("rewind past end of tape");
  for (auto& [store, by_slot] : param_nodes_) {
    std::erase_if(by_slot, [mark](const auto& kv) { return kv.second >= mark; });
  }
  nodes_.resize(mark);
}

void Tape::backward(Var loss, Gradients& grads) {
  if (loss.id >= nodes_.size()) throw UsageError("backward: loss not on this tape");
  if (shape_size(nodes_[loss.id].shape) != 1) {
    throw UsageError("backward: loss must be a scalar, got shape " +
                     shape_string(nodes_[loss.id].shape));
  }
  for (auto& [store, by_slot] : param_nodes_) {
    for (auto [slot, id] : by_slot) {
      if (slot >= grads.size() || grads[slot].shape() != nodes_[id].shape) {
        throw ConfigError("backward: gradient set does not match parameter slot " +
                          std::to_string(slot));
      }
      nodes_[id].grad_external = grads[slot].data();
    }
  }
  for (auto& n : nodes_) n.grad.clear();

  grad(loss)[0] = 1.0;
  for (std::uint32_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.backward || n.grad.empty()) continue;
    if (!finite(n.grad)) {
      throw NumericError("backward: non-finite gradient at node " + std::to_string(id) +
                         " (" + std::string(n.op) + ")");
    }
    n.backward(*this, id);
  }

  for (auto& n : nodes_) n.grad_external = nullptr;
  for (const auto& g : grads) {
    if (!g.all_finite()) throw NumericError("backward: non-finite parameter gradient");
  }
}

}  // namespace kpgen
