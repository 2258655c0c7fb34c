#include "gazeaeg/tape.hpp"

#include <algorithm>

#include "gazeaeg/error.hpp"

namespace gazeaeg::num {

std::size_t ParamStore::add(std::string name, Tensor value) {
  if (contains(name)) throw ParameterError("duplicate parameter name '" + name + "'");
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return values_.size() - 1;
}

std::size_t ParamStore::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  throw ParameterError("unknown parameter '" + std::string(name) + "'");
}

bool ParamStore::contains(std::string_view name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const auto& t : values_) n += t.size();
  return n;
}

Gradients::Gradients(const ParamStore& params) {
  grads_.reserve(params.size());
  for (const auto& t : params.tensors()) grads_.emplace_back(t.shape(), 0.0);
}

void Gradients::set_zero() {
  for (auto& g : grads_) g.set_zero();
}

void Gradients::add(const Gradients& other) {
  if (other.grads_.size() != grads_.size()) throw ParameterError("gradient sets differ in size");
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    auto dst = grads_[i].values();
    auto src = other.grads_[i].values();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  }
}

void Gradients::scale(double factor) {
  for (auto& g : grads_) {
    for (auto& v : g.values()) v *= factor;
  }
}

Tape::Node& Tape::node(Var v) {
  if (v.id >= nodes_.size()) throw ContractError("variable does not belong to this tape");
  return nodes_[v.id];
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id >= nodes_.size()) throw ContractError("variable does not belong to this tape");
  return nodes_[v.id];
}

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  auto& stored = nodes_.back();
  if (stored.value == nullptr) stored.value = &stored.owned;
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::constant(Tensor value) {
  value.check_finite("constant");
  Node n;
  n.kind = Kind::Constant;
  n.owned = std::move(value);
  return push(std::move(n));
}

Var Tape::leaf(Tensor value) {
  value.check_finite("leaf");
  Node n;
  n.kind = Kind::Leaf;
  n.owned = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::param(const ParamStore& store, std::size_t index) {
  Node n;
  n.kind = Kind::Param;
  n.value = &store.value(index);
  n.requires_grad = true;
  if (sink_ != nullptr) {
    if (index >= sink_->size() || !(*sink_)[index].same_shape(store.value(index))) {
      throw ParameterError("gradient sink does not match parameter '" + store.name(index) + "'");
    }
    n.external_grad = &(*sink_)[index];
  }
  return push(std::move(n));
}

const Tensor& Tape::value(Var v) const { return *node(v).value; }

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

const Tensor* Tape::grad(Var v) const {
  const auto& n = node(v);
  if (n.external_grad != nullptr) return n.external_grad;
  return n.grad.empty() ? nullptr : &n.grad;
}

Tensor* Tape::grad_target(Var v) {
  auto& n = node(v);
  if (!n.requires_grad) return nullptr;
  if (n.external_grad != nullptr) return n.external_grad;
  if (n.grad.empty()) n.grad = Tensor(n.value->shape(), 0.0);
  return &n.grad;
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, Backprop backprop, std::string_view op) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backprop), op);
}

Var Tape::record(Tensor value, std::span<const Var> inputs, Backprop backprop, std::string_view op) {
  if (backward_done_) throw ContractError("cannot record on a tape after backward()");
  value.check_finite(op);
  Node n;
  n.kind = Kind::Op;
  n.owned = std::move(value);
  for (auto in : inputs) {
    if (in.id >= nodes_.size()) throw ContractError(std::string(op) + ": input from another tape");
    n.requires_grad = n.requires_grad || nodes_[in.id].requires_grad;
  }
  if (n.requires_grad) n.backprop = std::move(backprop);
  return push(std::move(n));
}

void Tape::backward(Var loss) {
  if (backward_done_) throw ContractError("backward() already ran on this tape");
  const auto& root = node(loss);
  if (!root.value->is_scalar()) {
    throw ContractError("backward() needs a scalar loss, got shape " + shape_string(root.value->shape()));
  }
  backward_done_ = true;
  if (!root.requires_grad) return;
  if (root.kind == Kind::Param || root.kind == Kind::Leaf) {
    (*grad_target(loss))[0] += 1.0;
    return;
  }
  nodes_[loss.id].grad = Tensor(root.value->shape(), 1.0);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (n.kind != Kind::Op || !n.backprop || n.grad.empty()) continue;
    Tensor g = std::move(n.grad);
    n.grad = Tensor();
    n.backprop(*this, g);
    n.backprop = nullptr;
  }
}

}  // namespace gazeaeg::num
