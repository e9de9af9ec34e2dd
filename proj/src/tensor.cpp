#include "aeromatch/tensor.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <sstream>

namespace aeromatch {

namespace {
std::atomic<uint64_t> g_next_id{1};
thread_local Tape* g_active_tape = nullptr;
}  // namespace

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int e : s) {
    if (e <= 0) throw ShapeMismatch("non-positive extent in shape " + shape_str(s));
    n *= e;
  }
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

struct Tensor::Impl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty unless requires_grad
  bool requires_grad = false;
  uint64_t id = 0;
};

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const int64_t n = shape_numel(shape);
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->shape = std::move(shape);
  t.impl_->data.assign(static_cast<size_t>(n), 0.0);
  t.impl_->requires_grad = requires_grad;
  if (requires_grad) t.impl_->grad.assign(static_cast<size_t>(n), 0.0);
  t.impl_->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  return t;
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = value;
  return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  const int64_t n = shape_numel(shape);
  if (n != static_cast<int64_t>(values.size()))
    throw ShapeMismatch("Tensor::from: " + std::to_string(values.size()) +
                        " values for shape " + shape_str(shape));
  Tensor t = zeros(std::move(shape), requires_grad);
  std::memcpy(t.data(), values.data(), sizeof(double) * static_cast<size_t>(n));
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return impl_->shape; }
int64_t Tensor::size() const { return static_cast<int64_t>(impl_->data.size()); }
bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }
uint64_t Tensor::id() const { return impl_->id; }
double* Tensor::data() const { return impl_->data.data(); }

double* Tensor::grad() const {
  if (!impl_ || impl_->grad.empty()) return nullptr;
  return impl_->grad.data();
}

double Tensor::item() const {
  if (!defined() || size() != 1)
    throw NotScalar("item: tensor has shape " +
                    (defined() ? shape_str(shape()) : std::string("<undefined>")));
  return data()[0];
}

void Tensor::zero_grad() {
  if (impl_ && !impl_->grad.empty())
    std::memset(impl_->grad.data(), 0, sizeof(double) * impl_->grad.size());
}

Tensor Tensor::detached() const {
  Tensor t = zeros(shape(), false);
  std::memcpy(t.data(), data(), sizeof(double) * static_cast<size_t>(size()));
  return t;
}

Tape::~Tape() = default;

Tape* Tape::active() { return g_active_tape; }

Tape::Use::Use(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
Tape::Use::~Use() { g_active_tape = previous_; }

void Tape::record(const char* op, std::vector<Tensor> outputs,
                  std::function<void()> backward_fn) {
  nodes_.push_back(Node{op, std::move(outputs), std::move(backward_fn)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1)
    throw NotScalar("backward: loss must be a one-element tensor");
  bool on_tape = false;
  for (const Node& node : nodes_) {
    for (const Tensor& out : node.outputs) {
      if (out.id() == loss.id()) {
        on_tape = true;
        break;
      }
    }
    if (on_tape) break;
  }
  if (!on_tape) throw Error("backward: loss is not an output recorded on this tape");

  // Fresh pass: intermediate grads restart at zero, leaves keep accumulating.
  for (Node& node : nodes_)
    for (Tensor& out : node.outputs) out.zero_grad();

  loss.grad()[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->fn();
}

void guard_finite(const char* op, const Tensor& t) {
  const double* p = t.data();
  const int64_t n = t.size();
  for (int64_t i = 0; i < n; ++i) {
    if (!std::isfinite(p[i]))
      throw NumericError(std::string(op) + ": produced a non-finite value");
  }
}

}  // namespace aeromatch
