#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "nolab/error.hpp"

namespace nolab {

enum class DType : std::uint8_t { f32, f64 };

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);
const char* dtype_name(DType dtype);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> values;
  DType dtype = DType::f64;
  bool requires_grad = false;
  bool leaf = true;
};

}  // namespace detail

/// Dense row-major n-dimensional array with optional gradient tracking.
///
/// A Tensor is a shared handle: copies alias the same storage. Values are
/// held in double precision; a float32 tensor has every value rounded to
/// float, which is what the primitives guarantee for f32 outputs.
class Tensor {
 public:
  Tensor();

  static Tensor zeros(Shape shape, DType dtype = DType::f64);
  static Tensor full(Shape shape, double value, DType dtype = DType::f64);
  static Tensor from(Shape shape, std::vector<double> values, DType dtype = DType::f64);
  static Tensor scalar(double value, DType dtype = DType::f64);

  const Shape& shape() const { return node_->shape; }
  std::size_t dim() const { return node_->shape.size(); }
  std::size_t extent(std::size_t axis) const;
  std::size_t numel() const { return node_->values.size(); }
  DType dtype() const { return node_->dtype; }

  std::span<const double> values() const { return node_->values; }
  double item() const;
  double operator[](std::size_t flat) const { return node_->values[flat]; }

  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->leaf; }

  // Marks a leaf as a differentiation target. Only leaves may be marked.
  Tensor& set_requires_grad(bool on = true);

  // Write access for the parameter-update phase. Only valid on leaves;
  // the caller must not mutate a tensor that a live record still reads.
  std::span<double> mutable_values();

  // A fresh untracked leaf holding a copy of the values.
  Tensor detach() const;
  // Copy in another dtype. A tracked input yields a tracked copy whose
  // gradient passes through unchanged.
  Tensor to(DType dtype) const;

  const detail::Node* id() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node() const { return node_; }

  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Gradient accumulation slot handed to a backward closure. An empty span
/// means the corresponding input does not need a gradient.
using GradSlots = std::vector<std::span<double>>;
using BackwardFn = std::function<void(std::span<const double> grad_out, GradSlots& grad_in)>;

/// Ordered log of primitive applications (the computation record).
///
/// Entries are appended in execution order, which is a topological order
/// of the dataflow graph. backward() reads the record without modifying
/// it, so one record can be swept several times; call clear() to release
/// the saved intermediates.
class Tape {
 public:
  struct Entry {
    std::string kind;
    std::vector<std::shared_ptr<detail::Node>> inputs;
    std::shared_ptr<detail::Node> output;
    BackwardFn backward;
  };

  void record(Entry entry);
  void clear() { entries_.clear(); }
  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }

  // The record primitives append to on this thread. A default record is
  // always present; Scope swaps in another one for its lifetime.
  static Tape& active();

  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

 private:
  std::vector<Entry> entries_;
};

// Disables recording on this thread: primitive outputs come back untracked.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_recording_enabled();

/// Gradients of a scalar with respect to tracked leaves.
class GradientMap {
 public:
  bool contains(const Tensor& t) const { return grads_.count(t.id()) != 0; }
  const Tensor& of(const Tensor& t) const;
  std::size_t size() const { return grads_.size(); }
  bool empty() const { return grads_.empty(); }

  void insert(const detail::Node* key, Tensor grad) { grads_.insert_or_assign(key, std::move(grad)); }

 private:
  std::unordered_map<const detail::Node*, Tensor> grads_;
};

/// Reverse sweep over the active record seeded with d(output)/d(output) = 1.
/// Returns gradients for every tracked leaf the output depends on. An
/// untracked output yields an empty map.
GradientMap backward(const Tensor& output);
GradientMap backward(const Tensor& output, const Tape& tape);

namespace detail {

// Shared by every primitive: rounds to the promoted dtype, rejects
// non-finite values, and records the application when any input is tracked.
Tensor make_result(const char* kind, Shape shape, std::vector<double> values,
                   std::initializer_list<const Tensor*> inputs, BackwardFn backward);
Tensor make_result(const char* kind, Shape shape, std::vector<double> values,
                   const std::vector<const Tensor*>& inputs, BackwardFn backward);

}  // namespace detail

}  // namespace nolab
