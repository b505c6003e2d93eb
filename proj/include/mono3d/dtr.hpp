#pragma once

#include <string>
#include <vector>

#include "mono3d/dfe.hpp"
#include "mono3d/tensor.hpp"

namespace mono3d {

enum class AttentionKind { Vanilla, Linear };

AttentionKind attention_kind_from_string(const std::string& s);
std::string to_string(AttentionKind k);

struct AttentionConfig {
  int model_dim = 32;  // C
  int heads = 2;
  AttentionKind kind = AttentionKind::Linear;
  int ffn_dim = 0;  // 0 -> 4*C
  int enc_layers = 1;
  int dec_layers = 1;
  bool layer_norm = false;

  int ffn() const { return ffn_dim > 0 ? ffn_dim : 4 * model_dim; }
  void validate() const;
};

// softmax(Q K^T / sqrt(C)) V over [N,C] token matrices; O(N^2).
Tensor attention_vanilla(const Tensor& q, const Tensor& k, const Tensor& v);

// phi(x) = elu(x) + 1 feature-map attention computed by pre-aggregating the
// key-value summary, O(N). Denominators carry a +1e-9 guard.
Tensor attention_linear(const Tensor& q, const Tensor& k, const Tensor& v);

// Reference O(N^2) route for the same kernel: explicit weight matrix,
// row-normalized. Kept for the algebraic-identity check.
Tensor attention_linear_explicit(const Tensor& q, const Tensor& k, const Tensor& v);

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  static Linear create(int in, int out, Rng& rng);
  Tensor forward(const Tensor& x) const;  // x: [N, in]
};

struct MultiHeadAttention {
  Linear wq, wk, wv, wo;
  int heads = 1;
  AttentionKind kind = AttentionKind::Vanilla;

  static MultiHeadAttention create(const AttentionConfig& cfg, Rng& rng);
  Tensor forward(const Tensor& q, const Tensor& k, const Tensor& v) const;
  std::vector<Tensor> params() const;
};

Tensor multi_head(const Tensor& q, const Tensor& k, const Tensor& v,
                  const MultiHeadAttention& mha);

// Depth positional encoding: a learnable per-bin embedding table looked up by
// the argmax bin of each pixel, refined by a 3x3 convolution over the lookup.
struct DpeState {
  Tensor table;        // [D, C]
  Conv2dParams gconv;  // C -> C, 3x3, pad 1

  static DpeState create(int num_bins, int channels, Rng& rng);
  std::vector<Tensor> params() const;
};

Tensor build_dpe(const DepthDistribution& dist, const DpeState& s);  // [C,H,W]

struct FeedForward {
  Linear in, out;
  static FeedForward create(int dim, int hidden, Rng& rng);
  Tensor forward(const Tensor& x) const;
  std::vector<Tensor> params() const;
};

struct EncoderLayer {
  MultiHeadAttention self_attn;
  FeedForward ffn;
  Tensor ln1_g, ln1_b, ln2_g, ln2_b;  // used only when layer_norm is on
  bool layer_norm = false;
};

struct DecoderLayer {
  MultiHeadAttention self_attn;
  MultiHeadAttention cross_attn;
  FeedForward ffn;
  Tensor ln1_g, ln1_b, ln2_g, ln2_b, ln3_g, ln3_b;
  bool layer_norm = false;
};

struct DtrState {
  AttentionConfig cfg;
  std::vector<EncoderLayer> encoder;
  std::vector<DecoderLayer> decoder;

  static DtrState create(const AttentionConfig& cfg, Rng& rng);
  std::vector<Tensor> params() const;
};

// [C,H,W] feature to [N,C] tokens and back.
Tensor flatten_tokens(const Tensor& chw);
Tensor unflatten_tokens(const Tensor& tokens, int h, int w);

// Context tokens plus DPE through the self-attention encoder stack.
Tensor encoder_forward(const Tensor& context /*[C,H,W]*/, const Tensor& dpe /*[C,H,W]*/,
                       const DtrState& s);

// Depth-aware features (plus DPE) as queries; cross-attention against the
// encoded context; returns [N,C] tokens (reshape with unflatten_tokens).
Tensor decoder_forward(const Tensor& depth_feat /*[C,H,W]*/, const Tensor& encoded /*[N,C]*/,
                       const Tensor& dpe /*[C,H,W]*/, const DtrState& s);

struct BenchRow {
  int n = 0;
  AttentionKind kind = AttentionKind::Vanilla;
  double median_ms = 0.0;
  int runs = 0;
  uint64_t seed = 0;
  int64_t peak_live_elements = 0;
};

// Single-threaded wall-time benchmark of the raw kernels; deterministic
// inputs per seed, median of `runs` timed repetitions.
std::vector<BenchRow> bench_attention(const AttentionConfig& cfg, const std::vector<int>& sizes,
                                      int runs, uint64_t seed);
std::string bench_csv(const std::vector<BenchRow>& rows);

}  // namespace mono3d
