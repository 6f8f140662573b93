#include "nolab/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <sstream>

namespace nolab {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

const char* dtype_name(DType dtype) { return dtype == DType::f32 ? "float32" : "float64"; }

namespace {

void round_to(std::vector<double>& v, DType dtype) {
  if (dtype != DType::f32) return;
  for (auto& x : v) x = static_cast<double>(static_cast<float>(x));
}

// Rounds (for f32) and reports whether every value is finite, in one pass.
// The exponent test keeps the loop free of branches so it vectorizes.
bool round_checked(std::vector<double>& v, DType dtype) {
  constexpr std::uint64_t exp_mask = 0x7ff0000000000000ULL;
  std::uint64_t bad = 0;
  if (dtype == DType::f32) {
    for (auto& x : v) {
      x = static_cast<double>(static_cast<float>(x));
      bad |= static_cast<std::uint64_t>((std::bit_cast<std::uint64_t>(x) & exp_mask) == exp_mask);
    }
  } else {
    for (double x : v) bad |= static_cast<std::uint64_t>((std::bit_cast<std::uint64_t>(x) & exp_mask) == exp_mask);
  }
  return bad == 0;
}

std::shared_ptr<detail::Node> new_node(Shape shape, std::vector<double> values, DType dtype) {
  if (shape_numel(shape) != values.size())
    throw ShapeError("tensor: shape " + shape_str(shape) + " does not hold " +
                     std::to_string(values.size()) + " values");
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  round_to(values, dtype);
  node->values = std::move(values);
  node->dtype = dtype;
  return node;
}

thread_local Tape default_tape;
thread_local Tape* active_tape = nullptr;
thread_local bool recording = true;

}  // namespace

Tensor::Tensor() : node_(new_node({0}, {}, DType::f64)) {}

Tensor Tensor::zeros(Shape shape, DType dtype) {
  auto n = shape_numel(shape);
  return Tensor(new_node(std::move(shape), std::vector<double>(n, 0.0), dtype));
}

Tensor Tensor::full(Shape shape, double value, DType dtype) {
  auto n = shape_numel(shape);
  return Tensor(new_node(std::move(shape), std::vector<double>(n, value), dtype));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, DType dtype) {
  return Tensor(new_node(std::move(shape), std::move(values), dtype));
}

Tensor Tensor::scalar(double value, DType dtype) { return from({}, {value}, dtype); }

std::size_t Tensor::extent(std::size_t axis) const {
  if (axis >= dim()) throw ShapeError("tensor: axis out of range for shape " + shape_str(shape()));
  return node_->shape[axis];
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item: tensor of shape " + shape_str(shape()) + " is not a scalar");
  return node_->values[0];
}

Tensor& Tensor::set_requires_grad(bool on) {
  if (!node_->leaf) throw Error("set_requires_grad: only leaf tensors can be marked");
  node_->requires_grad = on;
  return *this;
}

std::span<double> Tensor::mutable_values() {
  if (!node_->leaf) throw Error("mutable_values: only leaf tensors are writable");
  return node_->values;
}

Tensor Tensor::detach() const { return Tensor(new_node(node_->shape, node_->values, node_->dtype)); }

Tensor Tensor::to(DType dtype) const {
  if (!node_->requires_grad || !recording) return Tensor(new_node(node_->shape, node_->values, dtype));
  // Tracked cast: gradients pass straight through.
  Tensor out = detail::make_result("cast", node_->shape, node_->values, {this},
                                   [](std::span<const double> g, GradSlots& gin) {
                                     for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
                                   });
  round_to(out.node_->values, dtype);
  out.node_->dtype = dtype;
  return out;
}

void Tape::record(Entry entry) { entries_.push_back(std::move(entry)); }

Tape& Tape::active() { return active_tape ? *active_tape : default_tape; }

Tape::Scope::Scope(Tape& tape) : previous_(active_tape) { active_tape = &tape; }
Tape::Scope::~Scope() { active_tape = previous_; }

NoGradGuard::NoGradGuard() : previous_(recording) { recording = false; }
NoGradGuard::~NoGradGuard() { recording = previous_; }

bool grad_recording_enabled() { return recording; }

const Tensor& GradientMap::of(const Tensor& t) const {
  auto it = grads_.find(t.id());
  if (it == grads_.end()) throw Error("gradient map: tensor is not a tracked leaf of this output");
  return it->second;
}

GradientMap backward(const Tensor& output) { return backward(output, Tape::active()); }

GradientMap backward(const Tensor& output, const Tape& tape) {
  if (output.numel() != 1)
    throw ShapeError("backward: seed must be a scalar, got shape " + shape_str(output.shape()));
  GradientMap result;
  if (!output.requires_grad()) return result;
  if (output.is_leaf()) {
    result.insert(output.id(), Tensor::scalar(1.0));
    return result;
  }

  const auto& entries = tape.entries();
  std::ptrdiff_t start = -1;
  for (std::ptrdiff_t i = static_cast<std::ptrdiff_t>(entries.size()) - 1; i >= 0; --i) {
    if (entries[static_cast<std::size_t>(i)].output.get() == output.id()) {
      start = i;
      break;
    }
  }
  if (start < 0) throw Error("backward: output is detached from the active computation record");

  std::unordered_map<const detail::Node*, std::vector<double>> grads;
  grads[output.id()] = {1.0};
  std::unordered_map<const detail::Node*, std::shared_ptr<detail::Node>> leaves;

  GradSlots slots;
  for (std::ptrdiff_t i = start; i >= 0; --i) {
    const auto& e = entries[static_cast<std::size_t>(i)];
    auto it = grads.find(e.output.get());
    if (it == grads.end()) continue;
    std::vector<double> gout = std::move(it->second);
    grads.erase(it);

    slots.assign(e.inputs.size(), {});
    for (std::size_t j = 0; j < e.inputs.size(); ++j) {
      const auto& in = e.inputs[j];
      if (!in->requires_grad) continue;
      auto& buf = grads[in.get()];
      if (buf.empty()) buf.assign(in->values.size(), 0.0);
      slots[j] = std::span<double>(buf);
      if (in->leaf) leaves.emplace(in.get(), in);
    }
    e.backward(gout, slots);
  }

  for (auto& [key, node] : leaves) {
    auto it = grads.find(key);
    if (it == grads.end()) continue;
    result.insert(key, Tensor::from(node->shape, std::move(it->second)));
  }
  return result;
}

namespace detail {

Tensor make_result(const char* kind, Shape shape, std::vector<double> values,
                   std::initializer_list<const Tensor*> inputs, BackwardFn backward) {
  return make_result(kind, std::move(shape), std::move(values), std::vector<const Tensor*>(inputs),
                     std::move(backward));
}

Tensor make_result(const char* kind, Shape shape, std::vector<double> values,
                   const std::vector<const Tensor*>& inputs, BackwardFn backward) {
  DType dtype = DType::f32;
  bool tracked = false;
  for (const auto* t : inputs) {
    if (t->dtype() == DType::f64) dtype = DType::f64;
    tracked = tracked || t->requires_grad();
  }
  if (inputs.size() == 0) dtype = DType::f64;
  if (!round_checked(values, dtype)) throw NumericError(std::string(kind) + ": non-finite value in output");
  auto node = new_node(std::move(shape), std::move(values), DType::f64);
  node->dtype = dtype;
  if (tracked && recording) {
    node->requires_grad = true;
    node->leaf = false;
    Tape::Entry entry;
    entry.kind = kind;
    entry.inputs.reserve(inputs.size());
    for (const auto* t : inputs) entry.inputs.push_back(t->node());
    entry.output = node;
    entry.backward = std::move(backward);
    Tape::active().record(std::move(entry));
  }
  return Tensor(std::move(node));
}

}  // namespace detail

}  // namespace nolab
