#include "mono3d/tensor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace mono3d {

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

namespace {
thread_local bool g_grad_enabled = true;
thread_local bool g_finite_checks = true;
thread_local int64_t g_live_elements = 0;
thread_local int64_t g_peak_live_elements = 0;
thread_local std::string g_corrupt_op;
}  // namespace

void set_gradient_corruption(const std::string& op_name) { g_corrupt_op = op_name; }

bool grad_enabled() { return g_grad_enabled; }
void set_grad_enabled(bool on) { g_grad_enabled = on; }
bool finite_checks_enabled() { return g_finite_checks; }
void set_finite_checks(bool on) { g_finite_checks = on; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

int64_t live_elements() { return g_live_elements; }
int64_t peak_live_elements() { return g_peak_live_elements; }
void reset_peak_live_elements() { g_peak_live_elements = g_live_elements; }

struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // lazily allocated
  bool requires_grad = false;
  bool is_leaf = true;
  const char* op = "leaf";
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backprop;

  TensorNode(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    g_live_elements += static_cast<int64_t>(data.size());
    g_peak_live_elements = std::max(g_peak_live_elements, g_live_elements);
  }
  ~TensorNode() { g_live_elements -= static_cast<int64_t>(data.size()); }

  std::vector<double>& ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

namespace {

std::shared_ptr<TensorNode> make_node(Shape shape, std::vector<double> data) {
  if (shape_numel(shape) != static_cast<int64_t>(data.size()))
    throw CheckError("tensor: shape " + shape_str(shape) + " does not match data length " +
                     std::to_string(data.size()));
  for (int d : shape)
    if (d < 0) throw CheckError("tensor: negative dimension in " + shape_str(shape));
  return std::make_shared<TensorNode>(std::move(shape), std::move(data));
}

void check_finite(const TensorNode& n, const char* op) {
  if (!g_finite_checks) return;
  for (double v : n.data)
    if (!std::isfinite(v))
      throw CheckError(std::string("non-finite value produced by op '") + op + "'");
}

// Wires the autodiff edge. Parents that do not require grad still sit in the
// parent list so backprop lambdas can index them uniformly.
Tensor make_op(const char* op, Shape shape, std::vector<double> data,
               std::vector<Tensor> inputs, std::function<void(TensorNode&)> backprop) {
  auto node = make_node(std::move(shape), std::move(data));
  node->op = op;
  check_finite(*node, op);
  bool track = false;
  if (g_grad_enabled)
    for (const Tensor& t : inputs)
      if (t.defined() && t.requires_grad()) track = true;
  if (track) {
    node->requires_grad = true;
    node->is_leaf = false;
    for (const Tensor& t : inputs) node->parents.push_back(t.shared_node());
    node->backprop = std::move(backprop);
  }
  return Tensor(std::move(node));
}

void accumulate(TensorNode& n, const std::vector<double>& g) {
  auto& dst = n.ensure_grad();
  for (size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

// Decomposition of an axis into (outer, len, inner) strides for generic
// per-slice loops: flat index = (o*len + k)*inner + i.
struct AxisSpan {
  int64_t outer, len, inner;
};
AxisSpan axis_span(const Shape& s, int axis) {
  if (axis < 0 || axis >= static_cast<int>(s.size()))
    throw CheckError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  AxisSpan a{1, s[axis], 1};
  for (int i = 0; i < axis; ++i) a.outer *= s[i];
  for (int i = axis + 1; i < static_cast<int>(s.size()); ++i) a.inner *= s[i];
  return a;
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const int64_t n = shape_numel(shape);
  auto node = make_node(std::move(shape), std::vector<double>(n, value));
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  auto n = make_node(std::move(shape), std::move(data));
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::uniform(Shape shape, Rng& rng, double lo, double hi, bool requires_grad) {
  const int64_t n = shape_numel(shape);
  std::vector<double> d(n);
  for (auto& v : d) v = rng.uniform(lo, hi);
  return from_data(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

const Shape& Tensor::shape() const { return node_->shape; }
int Tensor::rank() const { return static_cast<int>(node_->shape.size()); }
int Tensor::dim(int i) const { return node_->shape.at(i); }
int64_t Tensor::numel() const { return static_cast<int64_t>(node_->data.size()); }
std::span<const double> Tensor::data() const { return node_->data; }
std::span<double> Tensor::raw_data() { return node_->data; }
bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
std::span<const double> Tensor::grad() const { return node_->grad; }

void Tensor::zero_grad() {
  if (node_) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

double Tensor::value() const {
  if (numel() != 1) throw CheckError("value() on non-scalar tensor " + shape_str(shape()));
  return node_->data[0];
}

void Tensor::backward() const {
  if (!node_) throw CheckError("backward() on undefined tensor");
  if (numel() != 1) throw CheckError("backward() requires a scalar loss, got " + shape_str(shape()));
  if (!node_->requires_grad) return;

  // Post-order over the requires_grad subgraph: parents land before children,
  // so the reversed list visits each node after all of its consumers.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> seen;
  std::vector<std::pair<TensorNode*, size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      TensorNode* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  // Non-leaf grads are scratch per sweep; leaves accumulate across sweeps.
  for (TensorNode* n : order)
    if (!n->is_leaf) std::fill(n->grad.begin(), n->grad.end(), 0.0);

  node_->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* n = *it;
    if (!n->backprop || n->grad.empty()) continue;
    if (!g_corrupt_op.empty() && g_corrupt_op == n->op)
      for (auto& g : n->grad) g *= 1.01;
    n->backprop(*n);
  }
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw CheckError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

// Unary elementwise with derivative expressed from (x, y).
template <class F, class DF>
Tensor unary_op(const char* name, const Tensor& a, F f, DF df) {
  std::vector<double> y(a.numel());
  auto x = a.data();
  for (int64_t i = 0; i < a.numel(); ++i) y[i] = f(x[i]);
  return make_op(name, a.shape(), std::move(y), {a}, [df](TensorNode& self) {
    TensorNode& pa = *self.parents[0];
    if (!pa.requires_grad) return;
    auto& g = pa.ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * df(pa.data[i], self.data[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> y(a.numel());
  auto xa = a.data(), xb = b.data();
  for (int64_t i = 0; i < a.numel(); ++i) y[i] = xa[i] + xb[i];
  return make_op("add", a.shape(), std::move(y), {a, b}, [](TensorNode& self) {
    for (int k = 0; k < 2; ++k) {
      TensorNode& p = *self.parents[k];
      if (p.requires_grad) accumulate(p, self.grad);
    }
  });
}

Tensor add(const Tensor& a, double b) {
  return unary_op("add_scalar", a, [b](double x) { return x + b; },
                  [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<double> y(a.numel());
  auto xa = a.data(), xb = b.data();
  for (int64_t i = 0; i < a.numel(); ++i) y[i] = xa[i] - xb[i];
  return make_op("sub", a.shape(), std::move(y), {a, b}, [](TensorNode& self) {
    TensorNode& pa = *self.parents[0];
    TensorNode& pb = *self.parents[1];
    if (pa.requires_grad) accumulate(pa, self.grad);
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor sub(double a, const Tensor& b) {
  return unary_op("rsub_scalar", b, [a](double x) { return a - x; },
                  [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<double> y(a.numel());
  auto xa = a.data(), xb = b.data();
  for (int64_t i = 0; i < a.numel(); ++i) y[i] = xa[i] * xb[i];
  return make_op("mul", a.shape(), std::move(y), {a, b}, [](TensorNode& self) {
    TensorNode& pa = *self.parents[0];
    TensorNode& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.data[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.data[i];
    }
  });
}

Tensor divide(const Tensor& a, const Tensor& b) {
  require_same_shape("div", a, b);
  std::vector<double> y(a.numel());
  auto xa = a.data(), xb = b.data();
  for (int64_t i = 0; i < a.numel(); ++i) y[i] = xa[i] / xb[i];
  return make_op("div", a.shape(), std::move(y), {a, b}, [](TensorNode& self) {
    TensorNode& pa = *self.parents[0];
    TensorNode& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / pb.data[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (size_t i = 0; i < g.size(); ++i)
        g[i] -= self.grad[i] * self.data[i] / pb.data[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary_op("scale", a, [s](double x) { return x * s; },
                  [s](double, double) { return s; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor elu(const Tensor& a) {
  return unary_op("elu", a, [](double x) { return x >= 0.0 ? x : std::expm1(x); },
                  [](double x, double y) { return x >= 0.0 ? 1.0 : y + 1.0; });
}

Tensor relu(const Tensor& a) {
  return unary_op("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
                  [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& a) {
  return unary_op("exp", a, [](double x) { return std::exp(x); },
                  [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  for (double v : a.data())
    if (v <= 0.0) throw CheckError("log: non-positive input");
  return unary_op("log", a, [](double x) { return std::log(x); },
                  [](double x, double) { return 1.0 / x; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op("sigmoid", a,
                  [](double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                                 : std::exp(x) / (1.0 + std::exp(x)); },
                  [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& a) {
  return unary_op("softplus", a,
                  [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
                  [](double x, double) {
                    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                    : std::exp(x) / (1.0 + std::exp(x));
                  });
}

Tensor smooth_l1(const Tensor& a) {
  return unary_op("smooth_l1", a,
                  [](double x) { return std::abs(x) < 1.0 ? 0.5 * x * x : std::abs(x) - 0.5; },
                  [](double x, double) {
                    return std::abs(x) < 1.0 ? x : (x > 0.0 ? 1.0 : -1.0);
                  });
}

Tensor pow_scalar(const Tensor& a, double p) {
  for (double v : a.data())
    if (v < 0.0) throw CheckError("pow_scalar: negative base");
  return unary_op("pow_scalar", a, [p](double x) { return std::pow(x, p); },
                  [p](double x, double) { return x == 0.0 ? 0.0 : p * std::pow(x, p - 1.0); });
}

// ---------------------------------------------------------------------------
// linear algebra / layout
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw CheckError("matmul: expects 2-d operands, got " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2)
    throw CheckError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  std::vector<double> y(static_cast<size_t>(m) * n, 0.0);
  auto xa = a.data(), xb = b.data();
  for (int i = 0; i < m; ++i)
    for (int kk = 0; kk < k; ++kk) {
      const double av = xa[static_cast<size_t>(i) * k + kk];
      const double* brow = &xb[static_cast<size_t>(kk) * n];
      double* yrow = &y[static_cast<size_t>(i) * n];
      for (int j = 0; j < n; ++j) yrow[j] += av * brow[j];
    }
  return make_op("matmul", {m, n}, std::move(y), {a, b}, [m, k, n](TensorNode& self) {
    TensorNode& pa = *self.parents[0];
    TensorNode& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();  // dA = dC * B^T
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          const double gv = self.grad[static_cast<size_t>(i) * n + j];
          if (gv == 0.0) continue;
          const double* brow = &pb.data[0];
          for (int kk = 0; kk < k; ++kk)
            g[static_cast<size_t>(i) * k + kk] += gv * brow[static_cast<size_t>(kk) * n + j];
        }
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();  // dB = A^T * dC
      for (int kk = 0; kk < k; ++kk)
        for (int i = 0; i < m; ++i) {
          const double av = pa.data[static_cast<size_t>(i) * k + kk];
          if (av == 0.0) continue;
          const double* grow = &self.grad[static_cast<size_t>(i) * n];
          double* gbrow = &g[static_cast<size_t>(kk) * n];
          for (int j = 0; j < n; ++j) gbrow[j] += av * grow[j];
        }
    }
  });
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw CheckError("transpose: expects 2-d tensor");
  const int m = a.dim(0), n = a.dim(1);
  std::vector<double> y(a.numel());
  auto x = a.data();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) y[static_cast<size_t>(j) * m + i] = x[static_cast<size_t>(i) * n + j];
  return make_op("transpose", {n, m}, std::move(y), {a}, [m, n](TensorNode& self) {
    TensorNode& pa = *self.parents[0];
    if (!pa.requires_grad) return;
    auto& g = pa.ensure_grad();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j)
        g[static_cast<size_t>(i) * n + j] += self.grad[static_cast<size_t>(j) * m + i];
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    throw CheckError("reshape: element count mismatch, " + shape_str(a.shape()) + " -> " +
                     shape_str(shape));
  std::vector<double> y(a.data().begin(), a.data().end());
  return make_op("reshape", std::move(shape), std::move(y), {a}, [](TensorNode& self) {
    TensorNode& pa = *self.parents[0];
    if (pa.requires_grad) accumulate(pa, self.grad);
  });
}

Tensor permute3(const Tensor& a, int a0, int a1, int a2) {
  if (a.rank() != 3) throw CheckError("permute3: expects 3-d tensor");
  int perm[3] = {a0, a1, a2};
  bool used[3] = {false, false, false};
  for (int p : perm) {
    if (p < 0 || p > 2 || used[p]) throw CheckError("permute3: invalid axis permutation");
    used[p] = true;
  }
  const Shape& s = a.shape();
  Shape os = {s[a0], s[a1], s[a2]};
  std::vector<double> y(a.numel());
  auto x = a.data();
  // strides of the input in its own layout
  int64_t istr[3] = {static_cast<int64_t>(s[1]) * s[2], s[2], 1};
  int64_t ostr0 = static_cast<int64_t>(os[1]) * os[2], ostr1 = os[2];
  for (int i = 0; i < os[0]; ++i)
    for (int j = 0; j < os[1]; ++j)
      for (int kk = 0; kk < os[2]; ++kk) {
        int64_t src = i * istr[a0] + j * istr[a1] + kk * istr[a2];
        y[i * ostr0 + j * ostr1 + kk] = x[src];
      }
  std::array<int, 3> ax{a0, a1, a2};
  return make_op("permute3", std::move(os), std::move(y), {a}, [ax, s](TensorNode& self) {
    TensorNode& pa = *self.parents[0];
    if (!pa.requires_grad) return;
    auto& g = pa.ensure_grad();
    const Shape& os = self.shape;
    int64_t istr[3] = {static_cast<int64_t>(s[1]) * s[2], s[2], 1};
    int64_t ostr0 = static_cast<int64_t>(os[1]) * os[2], ostr1 = os[2];
    for (int i = 0; i < os[0]; ++i)
      for (int j = 0; j < os[1]; ++j)
        for (int kk = 0; kk < os[2]; ++kk) {
          int64_t src = i * istr[ax[0]] + j * istr[ax[1]] + kk * istr[ax[2]];
          g[src] += self.grad[i * ostr0 + j * ostr1 + kk];
        }
  });
}

Tensor concat(const std::vector<Tensor>& xs, int axis) {
  if (xs.empty()) throw CheckError("concat: no inputs");
  const Shape& s0 = xs[0].shape();
  int total = 0;
  for (const Tensor& t : xs) {
    if (t.rank() != static_cast<int>(s0.size()))
      throw CheckError("concat: rank mismatch");
    for (int d = 0; d < t.rank(); ++d)
      if (d != axis && t.dim(d) != s0[d])
        throw CheckError("concat: shape mismatch off the concat axis");
    total += t.dim(axis);
  }
  Shape os = s0;
  os[axis] = total;
  AxisSpan sp = axis_span(os, axis);
  std::vector<double> y(shape_numel(os));
  int64_t off = 0;
  for (const Tensor& t : xs) {
    const int len = t.dim(axis);
    auto x = t.data();
    for (int64_t o = 0; o < sp.outer; ++o)
      for (int64_t k = 0; k < len; ++k)
        std::copy_n(&x[(o * len + k) * sp.inner], sp.inner,
                    &y[(o * sp.len + off + k) * sp.inner]);
    off += len;
  }
  std::vector<int> lens;
  for (const Tensor& t : xs) lens.push_back(t.dim(axis));
  return make_op("concat", std::move(os), std::move(y), xs, [sp, lens](TensorNode& self) {
    int64_t off = 0;
    for (size_t pi = 0; pi < self.parents.size(); ++pi) {
      TensorNode& p = *self.parents[pi];
      const int len = lens[pi];
      if (p.requires_grad) {
        auto& g = p.ensure_grad();
        for (int64_t o = 0; o < sp.outer; ++o)
          for (int64_t k = 0; k < len; ++k) {
            const double* src = &self.grad[(o * sp.len + off + k) * sp.inner];
            double* dst = &g[(o * len + k) * sp.inner];
            for (int64_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
          }
      }
      off += len;
    }
  });
}

Tensor slice(const Tensor& a, int axis, int start, int len) {
  AxisSpan sp = axis_span(a.shape(), axis);
  if (start < 0 || len <= 0 || start + len > sp.len)
    throw CheckError("slice: range out of bounds");
  Shape os = a.shape();
  os[axis] = len;
  std::vector<double> y(shape_numel(os));
  auto x = a.data();
  for (int64_t o = 0; o < sp.outer; ++o)
    for (int64_t k = 0; k < len; ++k)
      std::copy_n(&x[(o * sp.len + start + k) * sp.inner], sp.inner,
                  &y[(o * len + k) * sp.inner]);
  return make_op("slice", std::move(os), std::move(y), {a}, [sp, start, len](TensorNode& self) {
    TensorNode& pa = *self.parents[0];
    if (!pa.requires_grad) return;
    auto& g = pa.ensure_grad();
    for (int64_t o = 0; o < sp.outer; ++o)
      for (int64_t k = 0; k < len; ++k) {
        const double* src = &self.grad[(o * len + k) * sp.inner];
        double* dst = &g[(o * sp.len + start + k) * sp.inner];
        for (int64_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
      }
  });
}

// ---------------------------------------------------------------------------
// reductions / normalizations
// ---------------------------------------------------------------------------

Tensor softmax(const Tensor& a, int axis) {
  AxisSpan sp = axis_span(a.shape(), axis);
  std::vector<double> y(a.numel());
  auto x = a.data();
  for (int64_t o = 0; o < sp.outer; ++o)
    for (int64_t i = 0; i < sp.inner; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int64_t k = 0; k < sp.len; ++k)
        mx = std::max(mx, x[(o * sp.len + k) * sp.inner + i]);
      double sum = 0.0;
      for (int64_t k = 0; k < sp.len; ++k) {
        double e = std::exp(x[(o * sp.len + k) * sp.inner + i] - mx);
        y[(o * sp.len + k) * sp.inner + i] = e;
        sum += e;
      }
      for (int64_t k = 0; k < sp.len; ++k) y[(o * sp.len + k) * sp.inner + i] /= sum;
    }
  return make_op("softmax", a.shape(), std::move(y), {a}, [sp](TensorNode& self) {
    TensorNode& pa = *self.parents[0];
    if (!pa.requires_grad) return;
    auto& g = pa.ensure_grad();
    for (int64_t o = 0; o < sp.outer; ++o)
      for (int64_t i = 0; i < sp.inner; ++i) {
        double dot = 0.0;
        for (int64_t k = 0; k < sp.len; ++k) {
          int64_t idx = (o * sp.len + k) * sp.inner + i;
          dot += self.grad[idx] * self.data[idx];
        }
        for (int64_t k = 0; k < sp.len; ++k) {
          int64_t idx = (o * sp.len + k) * sp.inner + i;
          g[idx] += self.data[idx] * (self.grad[idx] - dot);
        }
      }
  });
}

Tensor normalize_sum(const Tensor& a, int axis) {
  AxisSpan sp = axis_span(a.shape(), axis);
  std::vector<double> y(a.numel(), 0.0);
  auto x = a.data();
  for (int64_t o = 0; o < sp.outer; ++o)
    for (int64_t i = 0; i < sp.inner; ++i) {
      double sum = 0.0;
      for (int64_t k = 0; k < sp.len; ++k) sum += x[(o * sp.len + k) * sp.inner + i];
      if (sum != 0.0)
        for (int64_t k = 0; k < sp.len; ++k) {
          int64_t idx = (o * sp.len + k) * sp.inner + i;
          y[idx] = x[idx] / sum;
        }
    }
  return make_op("normalize_sum", a.shape(), std::move(y), {a}, [sp](TensorNode& self) {
    TensorNode& pa = *self.parents[0];
    if (!pa.requires_grad) return;
    auto& g = pa.ensure_grad();
    for (int64_t o = 0; o < sp.outer; ++o)
      for (int64_t i = 0; i < sp.inner; ++i) {
        double sum = 0.0, dot = 0.0;
        for (int64_t k = 0; k < sp.len; ++k) {
          int64_t idx = (o * sp.len + k) * sp.inner + i;
          sum += pa.data[idx];
          dot += self.grad[idx] * self.data[idx];
        }
        if (sum == 0.0) continue;  // zero-mass slice stays at zero, zero gradient
        for (int64_t k = 0; k < sp.len; ++k) {
          int64_t idx = (o * sp.len + k) * sp.inner + i;
          g[idx] += (self.grad[idx] - dot) / sum;
        }
      }
  });
}

Tensor sum_all(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return make_op("sum_all", {1}, {s}, {a}, [](TensorNode& self) {
    TensorNode& pa = *self.parents[0];
    if (!pa.requires_grad) return;
    auto& g = pa.ensure_grad();
    for (auto& v : g) v += self.grad[0];
  });
}

Tensor mean_all(const Tensor& a) {
  if (a.numel() == 0) throw CheckError("mean_all: empty tensor");
  return scale(sum_all(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor rowwise_scale(const Tensor& a, const Tensor& s) {
  if (a.rank() != 2 || s.rank() != 1 || s.dim(0) != a.dim(0))
    throw CheckError("rowwise_scale: expects [N,C] and [N]");
  const int n = a.dim(0), c = a.dim(1);
  std::vector<double> y(a.numel());
  auto xa = a.data(), xs = s.data();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) y[static_cast<size_t>(i) * c + j] = xa[static_cast<size_t>(i) * c + j] * xs[i];
  return make_op("rowwise_scale", a.shape(), std::move(y), {a, s}, [n, c](TensorNode& self) {
    TensorNode& pa = *self.parents[0];
    TensorNode& ps = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < c; ++j)
          g[static_cast<size_t>(i) * c + j] += self.grad[static_cast<size_t>(i) * c + j] * ps.data[i];
    }
    if (ps.requires_grad) {
      auto& g = ps.ensure_grad();
      for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < c; ++j)
          acc += self.grad[static_cast<size_t>(i) * c + j] * pa.data[static_cast<size_t>(i) * c + j];
        g[i] += acc;
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (x.rank() != 2) throw CheckError("layer_norm: expects [N,C]");
  const int n = x.dim(0), c = x.dim(1);
  if (gamma.rank() != 1 || gamma.dim(0) != c || beta.rank() != 1 || beta.dim(0) != c)
    throw CheckError("layer_norm: gamma/beta must be [C]");
  std::vector<double> y(x.numel()), xhat(x.numel()), inv_std(n);
  auto xd = x.data(), gd = gamma.data(), bd = beta.data();
  for (int i = 0; i < n; ++i) {
    const double* row = &xd[static_cast<size_t>(i) * c];
    double mu = 0.0;
    for (int j = 0; j < c; ++j) mu += row[j];
    mu /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= c;
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < c; ++j) {
      double xh = (row[j] - mu) * inv_std[i];
      xhat[static_cast<size_t>(i) * c + j] = xh;
      y[static_cast<size_t>(i) * c + j] = gd[j] * xh + bd[j];
    }
  }
  return make_op("layer_norm", x.shape(), std::move(y), {x, gamma, beta},
                 [n, c, xhat = std::move(xhat), inv_std = std::move(inv_std)](TensorNode& self) {
                   TensorNode& px = *self.parents[0];
                   TensorNode& pg = *self.parents[1];
                   TensorNode& pb = *self.parents[2];
                   for (int i = 0; i < n; ++i) {
                     const double* gy = &self.grad[static_cast<size_t>(i) * c];
                     const double* xh = &xhat[static_cast<size_t>(i) * c];
                     if (pg.requires_grad) {
                       auto& gg = pg.ensure_grad();
                       for (int j = 0; j < c; ++j) gg[j] += gy[j] * xh[j];
                     }
                     if (pb.requires_grad) {
                       auto& gb = pb.ensure_grad();
                       for (int j = 0; j < c; ++j) gb[j] += gy[j];
                     }
                     if (px.requires_grad) {
                       auto& gx = px.ensure_grad();
                       double sum_g = 0.0, sum_gx = 0.0;
                       for (int j = 0; j < c; ++j) {
                         double dxh = gy[j] * pg.data[j];
                         sum_g += dxh;
                         sum_gx += dxh * xh[j];
                       }
                       for (int j = 0; j < c; ++j) {
                         double dxh = gy[j] * pg.data[j];
                         gx[static_cast<size_t>(i) * c + j] +=
                             inv_std[i] * (dxh - sum_g / c - xh[j] * sum_gx / c);
                       }
                     }
                   }
                 });
}

// ---------------------------------------------------------------------------
// gather / scatter
// ---------------------------------------------------------------------------

Tensor gather_rows(const Tensor& table, const std::vector<int>& idx) {
  if (table.rank() != 2) throw CheckError("gather_rows: table must be 2-d");
  const int r = table.dim(0), c = table.dim(1);
  for (int i : idx)
    if (i < 0 || i >= r) throw CheckError("gather_rows: index out of range");
  const int n = static_cast<int>(idx.size());
  std::vector<double> y(static_cast<size_t>(n) * c);
  auto x = table.data();
  for (int i = 0; i < n; ++i)
    std::copy_n(&x[static_cast<size_t>(idx[i]) * c], c, &y[static_cast<size_t>(i) * c]);
  return make_op("gather_rows", {n, c}, std::move(y), {table}, [idx, c](TensorNode& self) {
    TensorNode& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (size_t i = 0; i < idx.size(); ++i)
      for (int j = 0; j < c; ++j)
        g[static_cast<size_t>(idx[i]) * c + j] += self.grad[i * c + j];
  });
}

Tensor gather_bin_probs(const Tensor& probs, const std::vector<int>& bins) {
  if (probs.rank() != 3) throw CheckError("gather_bin_probs: probs must be [D,H,W]");
  const int d = probs.dim(0);
  const int64_t hw = static_cast<int64_t>(probs.dim(1)) * probs.dim(2);
  if (static_cast<int64_t>(bins.size()) != hw)
    throw CheckError("gather_bin_probs: bin map size mismatch");
  std::vector<int64_t> offsets;
  for (int64_t p = 0; p < hw; ++p) {
    int b = bins[p];
    if (b < 0) continue;
    if (b >= d) throw CheckError("gather_bin_probs: bin index out of range");
    offsets.push_back(static_cast<int64_t>(b) * hw + p);
  }
  const int n = static_cast<int>(offsets.size());
  std::vector<double> y(n);
  auto x = probs.data();
  for (int i = 0; i < n; ++i) y[i] = x[offsets[i]];
  return make_op("gather_bin_probs", {n}, std::move(y), {probs},
                 [offsets = std::move(offsets)](TensorNode& self) {
                   TensorNode& p = *self.parents[0];
                   if (!p.requires_grad) return;
                   auto& g = p.ensure_grad();
                   for (size_t i = 0; i < offsets.size(); ++i) g[offsets[i]] += self.grad[i];
                 });
}

std::vector<int> argmax_axis(const Tensor& a, int axis) {
  AxisSpan sp = axis_span(a.shape(), axis);
  std::vector<int> out(sp.outer * sp.inner);
  auto x = a.data();
  for (int64_t o = 0; o < sp.outer; ++o)
    for (int64_t i = 0; i < sp.inner; ++i) {
      int best = 0;
      double bv = x[(o * sp.len) * sp.inner + i];
      for (int64_t k = 1; k < sp.len; ++k) {
        double v = x[(o * sp.len + k) * sp.inner + i];
        if (v > bv) {  // ties keep the lowest index
          bv = v;
          best = static_cast<int>(k);
        }
      }
      out[o * sp.inner + i] = best;
    }
  return out;
}

// ---------------------------------------------------------------------------
// convolution (direct loops; desk-scale maps)
// ---------------------------------------------------------------------------

Conv2dParams Conv2dParams::create(int in_ch, int out_ch, int kh, int kw, Rng& rng,
                                  int groups, int padding, int stride, bool with_bias) {
  Conv2dParams p;
  p.in_channels = in_ch;
  p.out_channels = out_ch;
  p.kernel_h = kh;
  p.kernel_w = kw;
  p.groups = groups;
  p.padding = padding;
  p.stride = stride;
  p.validate();
  const int fan_in = (in_ch / groups) * kh * kw;
  const double bound = std::sqrt(1.0 / fan_in);
  p.weight = Tensor::uniform({out_ch, in_ch / groups, kh, kw}, rng, -bound, bound, true);
  if (with_bias) p.bias = Tensor::uniform({out_ch}, rng, -bound, bound, true);
  return p;
}

void Conv2dParams::validate() const {
  if (in_channels <= 0 || out_channels <= 0 || kernel_h <= 0 || kernel_w <= 0 || groups <= 0)
    throw CheckError("conv2d: non-positive parameter");
  if (in_channels % groups != 0 || out_channels % groups != 0)
    throw CheckError("conv2d: channel counts not divisible by groups");
  if (stride < 1 || padding < 0) throw CheckError("conv2d: bad stride/padding");
}

Tensor conv2d(const Tensor& x, const Conv2dParams& p) {
  p.validate();
  if (x.rank() != 3 || x.dim(0) != p.in_channels)
    throw CheckError("conv2d: input " + shape_str(x.shape()) + " does not match in_channels " +
                     std::to_string(p.in_channels));
  const int h = x.dim(1), w = x.dim(2);
  const int ho_num = h + 2 * p.padding - p.kernel_h;
  const int wo_num = w + 2 * p.padding - p.kernel_w;
  if (ho_num < 0 || wo_num < 0 || ho_num % p.stride != 0 || wo_num % p.stride != 0)
    throw CheckError("conv2d: non-integral output size");
  const int ho = ho_num / p.stride + 1, wo = wo_num / p.stride + 1;
  const int icg = p.in_channels / p.groups, ocg = p.out_channels / p.groups;
  const int kh = p.kernel_h, kw = p.kernel_w, pad = p.padding, st = p.stride;
  const bool has_bias = p.bias.defined();

  std::vector<double> y(static_cast<size_t>(p.out_channels) * ho * wo, 0.0);
  auto xd = x.data();
  auto wd = p.weight.data();
  for (int oc = 0; oc < p.out_channels; ++oc) {
    const int g = oc / ocg;
    const double b = has_bias ? p.bias.data()[oc] : 0.0;
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox) {
        double acc = b;
        for (int ic = 0; ic < icg; ++ic)
          for (int ky = 0; ky < kh; ++ky) {
            const int iy = oy * st - pad + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < kw; ++kx) {
              const int ix = ox * st - pad + kx;
              if (ix < 0 || ix >= w) continue;
              acc += wd[((static_cast<size_t>(oc) * icg + ic) * kh + ky) * kw + kx] *
                     xd[(static_cast<size_t>(g * icg + ic) * h + iy) * w + ix];
            }
          }
        y[(static_cast<size_t>(oc) * ho + oy) * wo + ox] = acc;
      }
  }

  std::vector<Tensor> inputs = {x, p.weight};
  if (has_bias) inputs.push_back(p.bias);
  auto geom = p;  // copy of the hyperparameters for the backward closure
  return make_op("conv2d", {p.out_channels, ho, wo}, std::move(y), std::move(inputs),
                 [geom, h, w, ho, wo, icg, ocg, has_bias](TensorNode& self) {
                   TensorNode& px = *self.parents[0];
                   TensorNode& pw = *self.parents[1];
                   const int kh = geom.kernel_h, kw = geom.kernel_w;
                   const int pad = geom.padding, st = geom.stride;
                   double* gx = px.requires_grad ? px.ensure_grad().data() : nullptr;
                   double* gw = pw.requires_grad ? pw.ensure_grad().data() : nullptr;
                   for (int oc = 0; oc < geom.out_channels; ++oc) {
                     const int g = oc / ocg;
                     for (int oy = 0; oy < ho; ++oy)
                       for (int ox = 0; ox < wo; ++ox) {
                         const double gy = self.grad[(static_cast<size_t>(oc) * ho + oy) * wo + ox];
                         if (gy == 0.0) continue;
                         for (int ic = 0; ic < icg; ++ic)
                           for (int ky = 0; ky < kh; ++ky) {
                             const int iy = oy * st - pad + ky;
                             if (iy < 0 || iy >= h) continue;
                             for (int kx = 0; kx < kw; ++kx) {
                               const int ix = ox * st - pad + kx;
                               if (ix < 0 || ix >= w) continue;
                               const size_t wi =
                                   ((static_cast<size_t>(oc) * icg + ic) * kh + ky) * kw + kx;
                               const size_t xi =
                                   (static_cast<size_t>(g * icg + ic) * h + iy) * w + ix;
                               if (gx) gx[xi] += gy * pw.data[wi];
                               if (gw) gw[wi] += gy * px.data[xi];
                             }
                           }
                       }
                   }
                   if (has_bias) {
                     TensorNode& pb = *self.parents[2];
                     if (pb.requires_grad) {
                       auto& gb = pb.ensure_grad();
                       for (int oc = 0; oc < geom.out_channels; ++oc) {
                         double acc = 0.0;
                         for (int i = 0; i < ho * wo; ++i)
                           acc += self.grad[static_cast<size_t>(oc) * ho * wo + i];
                         gb[oc] += acc;
                       }
                     }
                   }
                 });
}

// ---------------------------------------------------------------------------
// fixture i/o
// ---------------------------------------------------------------------------

void save_tensor(const Tensor& t, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open for write: " + path);
  f.write("TNSR", 4);
  uint32_t rank = static_cast<uint32_t>(t.rank());
  f.write(reinterpret_cast<const char*>(&rank), 4);
  for (int i = 0; i < t.rank(); ++i) {
    uint64_t d = static_cast<uint64_t>(t.dim(i));
    f.write(reinterpret_cast<const char*>(&d), 8);
  }
  f.write(reinterpret_cast<const char*>(t.data().data()),
          static_cast<std::streamsize>(t.numel() * sizeof(double)));
  if (!f) throw InputError("short write: " + path);
}

Tensor load_tensor(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open: " + path);
  char magic[4];
  if (!f.read(magic, 4) || std::memcmp(magic, "TNSR", 4) != 0)
    throw InputError("not a TNSR file: " + path);
  uint32_t rank = 0;
  if (!f.read(reinterpret_cast<char*>(&rank), 4) || rank == 0 || rank > 8)
    throw InputError("bad TNSR rank in " + path);
  Shape shape(rank);
  for (uint32_t i = 0; i < rank; ++i) {
    uint64_t d = 0;
    if (!f.read(reinterpret_cast<char*>(&d), 8) || d == 0 || d > (1u << 24))
      throw InputError("bad TNSR dimension in " + path);
    shape[i] = static_cast<int>(d);
  }
  std::vector<double> data(shape_numel(shape));
  if (!f.read(reinterpret_cast<char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(double))))
    throw InputError("truncated TNSR payload in " + path);
  return Tensor::from_data(std::move(shape), std::move(data));
}

// ---------------------------------------------------------------------------
// gradient check
// ---------------------------------------------------------------------------

GradCheckResult gradcheck(const std::string& name,
                          const std::function<Tensor(const Tensor&)>& f,
                          const Tensor& x0, double eps, double tol) {
  if (eps <= 0.0) throw CheckError("gradcheck: eps must be positive");
  std::vector<double> base(x0.data().begin(), x0.data().end());

  Tensor x = Tensor::from_data(x0.shape(), base, true);
  Tensor loss = f(x);
  if (loss.numel() != 1) throw CheckError("gradcheck: f must return a scalar");
  loss.backward();
  std::vector<double> analytic(x.grad().begin(), x.grad().end());

  GradCheckResult res{name, 0.0, false};
  {
    NoGradGuard ng;
    for (size_t i = 0; i < base.size(); ++i) {
      std::vector<double> d = base;
      d[i] = base[i] + eps;
      double fp = f(Tensor::from_data(x0.shape(), d)).value();
      d[i] = base[i] - eps;
      double fm = f(Tensor::from_data(x0.shape(), d)).value();
      double numeric = (fp - fm) / (2.0 * eps);
      double rel = std::abs(analytic[i] - numeric) /
                   std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
      res.max_rel_err = std::max(res.max_rel_err, rel);
    }
  }
  res.pass = res.max_rel_err < tol;
  return res;
}

}  // namespace mono3d
