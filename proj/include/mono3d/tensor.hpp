#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mono3d/common.hpp"

namespace mono3d {

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Thread-local switches. Gradient recording is on by default; finite checks
// scan every op output for NaN/Inf and throw CheckError (an error state must
// never propagate silently). The benchmark turns both off.
bool grad_enabled();
void set_grad_enabled(bool on);
bool finite_checks_enabled();
void set_finite_checks(bool on);

struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Live-element accounting for the attention benchmark's memory column.
int64_t live_elements();
int64_t peak_live_elements();
void reset_peak_live_elements();

// Test hook: ops with this name get their upstream gradient scaled by 1.01
// during backward, so the gradient checker must flag them. Empty disables.
void set_gradient_corruption(const std::string& op_name);

struct TensorNode;

// Dense row-major N-d array of doubles with optional reverse-mode gradient
// tracking. Handles are cheap value types sharing an immutable-by-convention
// node; every op allocates a fresh output.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor uniform(Shape shape, Rng& rng, double lo, double hi, bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int rank() const;
  int dim(int i) const;
  int64_t numel() const;

  std::span<const double> data() const;
  // Mutable access for in-place parameter updates between graph builds.
  std::span<double> raw_data();

  bool requires_grad() const;
  std::span<const double> grad() const;  // empty until backward touches it
  void zero_grad();

  // Reverse-mode sweep from a scalar. Leaf grads accumulate across calls.
  void backward() const;

  double value() const;  // numel() == 1 only

  TensorNode* node() const { return node_.get(); }
  const std::shared_ptr<TensorNode>& shared_node() const { return node_; }
  explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<TensorNode> node_;
};

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, double b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor sub(double a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor divide(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor neg(const Tensor& a);
Tensor elu(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);  // requires strictly positive input
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor smooth_l1(const Tensor& a);            // 0.5x^2 for |x|<1, |x|-0.5 otherwise
Tensor pow_scalar(const Tensor& a, double p); // requires nonnegative input

// ---- linear algebra / layout ----
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);  // 2-d
Tensor reshape(const Tensor& a, Shape shape);
Tensor permute3(const Tensor& a, int a0, int a1, int a2);  // 3-d axis permutation
Tensor concat(const std::vector<Tensor>& xs, int axis);
Tensor slice(const Tensor& a, int axis, int start, int len);

// ---- reductions / normalizations ----
Tensor softmax(const Tensor& a, int axis);        // max-subtracted, slices sum to 1
Tensor normalize_sum(const Tensor& a, int axis);  // x / sum(x) per slice; zero-sum slice -> zeros
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor rowwise_scale(const Tensor& a, const Tensor& s);  // a: [N,C], s: [N]
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// ---- gather / scatter ----
Tensor gather_rows(const Tensor& table, const std::vector<int>& idx);
// probs: [D,H,W]; bins: H*W row-major with -1 marking invalid pixels.
// Returns the per-pixel probability of the target bin over valid pixels only,
// so masked pixels contribute exactly zero gradient.
Tensor gather_bin_probs(const Tensor& probs, const std::vector<int>& bins);

// Non-differentiating helper: per-slice argmax along `axis` (lowest index wins ties).
std::vector<int> argmax_axis(const Tensor& a, int axis);

// ---- convolution ----
struct Conv2dParams {
  int in_channels = 0;
  int out_channels = 0;
  int kernel_h = 1;
  int kernel_w = 1;
  int groups = 1;
  int padding = 0;  // symmetric
  int stride = 1;
  Tensor weight;  // [out, in/groups, kh, kw]
  Tensor bias;    // optional [out]

  // Uniform +-sqrt(1/fan_in) init, fan_in = (in/groups)*kh*kw.
  static Conv2dParams create(int in_ch, int out_ch, int kh, int kw, Rng& rng,
                             int groups = 1, int padding = 0, int stride = 1,
                             bool with_bias = true);
  void validate() const;
};

Tensor conv2d(const Tensor& x, const Conv2dParams& p);  // x: [Cin,H,W]

// ---- fixture i/o: "TNSR" magic, u32 rank, u64 dims..., f64 row-major ----
void save_tensor(const Tensor& t, const std::string& path);
Tensor load_tensor(const std::string& path);

// ---- finite-difference gradient check ----
struct GradCheckResult {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = false;
};

// Compares analytic d(f)/dx against central differences per coordinate.
// f must be deterministic and return a scalar tensor.
GradCheckResult gradcheck(const std::string& name,
                          const std::function<Tensor(const Tensor&)>& f,
                          const Tensor& x0, double eps = 1e-5, double tol = 1e-4);

}  // namespace mono3d
