#pragma once

#include <utility>
#include <vector>

#include "mono3d/tensor.hpp"

namespace mono3d {

// Per-pixel categorical depth probabilities, softmax over the bin axis.
struct DepthDistribution {
  Tensor probs;  // [D, H, W]

  int num_bins() const { return probs.dim(0); }
  int height() const { return probs.dim(1); }
  int width() const { return probs.dim(2); }
};

// Depth-aware feature enhancement state. The depth head is two convolutions
// (3x3 C->C with elu, then 1x1 C->D logits); adjacent bins are merged by a
// grouped 1x1 convolution initialized to within-group averaging so the
// untrained module is exact bin pooling; fusion is a 1x1 over the channel
// concat of the initial and reconstructed features.
struct DfeState {
  Conv2dParams pred_conv1;  // C -> C, 3x3, pad 1
  Conv2dParams pred_conv2;  // C -> D, 1x1
  Conv2dParams merge_conv;  // D -> D' = D/r, groups = D', no bias
  Conv2dParams fuse_conv;   // 2C -> C, 1x1
  int channels = 0;
  int num_bins = 0;
  int merge_scale = 1;  // r

  static DfeState create(int channels, int num_bins, int merge_scale, Rng& rng);
  int merged_bins() const { return num_bins / merge_scale; }
  std::vector<Tensor> params() const;
};

// Initial depth-aware feature X and the predicted bin distribution.
std::pair<Tensor, DepthDistribution> predict_depth(const Tensor& feat, const DfeState& s);

// [D',H,W] distribution over merged bins: grouped conv, clamp at zero,
// renormalize per pixel so downstream stays a valid convex weighting.
Tensor merge_bins(const DepthDistribution& dist, const DfeState& s);

// Prototype per merged bin: probability-weighted mean feature over pixels,
// weights normalized across the pixel set per prototype. Zero-mass
// prototypes come out as zero vectors.
Tensor depth_prototypes(const Tensor& xp /*[C,H,W]*/, const Tensor& merged /*[D',H,W]*/);

// Per-pixel convex combination of prototype rows under the merged
// distribution.
Tensor reconstruct(const Tensor& merged /*[D',H,W]*/, const Tensor& protos /*[D',C]*/);

// fuse_conv(concat(X, F')) -> enhanced depth-aware feature, same shape as X.
Tensor enhance(const Tensor& x, const Tensor& reconstructed, const DfeState& s);

// Full module: backbone feature in, enhanced feature out; the predicted
// distribution is reported for the auxiliary loss and the positional encoding.
Tensor dfe_forward(const Tensor& feat, const DfeState& s, DepthDistribution* dist_out = nullptr);

}  // namespace mono3d
