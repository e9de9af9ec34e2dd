#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "aeromatch/errors.hpp"

namespace aeromatch {

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

/// Dense n-dimensional array of 64-bit reals (row-major) with an optional
/// gradient accumulator. Tensor is a handle: copies share storage.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  int dim(int i) const { return shape()[static_cast<size_t>(i)]; }
  int64_t size() const;
  bool requires_grad() const;
  uint64_t id() const;

  /// Raw storage. Pointers stay valid while any handle is alive.
  double* data() const;
  /// Gradient storage; null when the tensor does not carry gradients.
  double* grad() const;

  /// Value of a one-element tensor; throws NotScalar otherwise.
  double item() const;

  void zero_grad();

  /// Deep copy of the values with no gradient tracking.
  Tensor detached() const;

  bool same_storage(const Tensor& o) const { return impl_ == o.impl_; }

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

/// Reverse-mode tape: ops push one backward closure per recorded node and
/// backward() replays them exactly once in reverse order. A tape and the
/// tensors recorded on it are confined to a single thread.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  ~Tape();

  /// Tape recording ops on the current thread, or null.
  static Tape* active();

  /// Activates a tape on the current thread for the guard's lifetime.
  class Use {
   public:
    explicit Use(Tape& tape);
    ~Use();
    Use(const Use&) = delete;
    Use& operator=(const Use&) = delete;

   private:
    Tape* previous_;
  };

  void record(const char* op, std::vector<Tensor> outputs,
              std::function<void()> backward_fn);

  size_t node_count() const { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and replays the recorded closures in reverse.
  /// Gradients of op outputs are reset first; leaf gradients accumulate, so
  /// repeated calls without zero_grad add up.
  void backward(const Tensor& loss);

 private:
  struct Node {
    const char* op;
    std::vector<Tensor> outputs;
    std::function<void()> fn;
  };
  std::vector<Node> nodes_;
};

/// Throws NumericError naming `op` when any value is not finite.
void guard_finite(const char* op, const Tensor& t);

}  // namespace aeromatch
