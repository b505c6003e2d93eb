#include "mono3d/dfe.hpp"

namespace mono3d {

DfeState DfeState::create(int channels, int num_bins, int merge_scale, Rng& rng) {
  if (num_bins % merge_scale != 0)
    throw CheckError("dfe: bin count not divisible by merge scale");
  DfeState s;
  s.channels = channels;
  s.num_bins = num_bins;
  s.merge_scale = merge_scale;
  Rng r1 = rng.fork(1), r2 = rng.fork(2), r3 = rng.fork(3);
  s.pred_conv1 = Conv2dParams::create(channels, channels, 3, 3, r1, 1, 1);
  s.pred_conv2 = Conv2dParams::create(channels, num_bins, 1, 1, r2);
  const int merged = num_bins / merge_scale;
  s.merge_conv.in_channels = num_bins;
  s.merge_conv.out_channels = merged;
  s.merge_conv.groups = merged;
  s.merge_conv.weight = Tensor::full({merged, merge_scale, 1, 1}, 1.0 / merge_scale, true);
  s.fuse_conv = Conv2dParams::create(2 * channels, channels, 1, 1, r3);
  return s;
}

std::vector<Tensor> DfeState::params() const {
  return {pred_conv1.weight, pred_conv1.bias, pred_conv2.weight, pred_conv2.bias,
          merge_conv.weight, fuse_conv.weight, fuse_conv.bias};
}

std::pair<Tensor, DepthDistribution> predict_depth(const Tensor& feat, const DfeState& s) {
  Tensor x = elu(conv2d(feat, s.pred_conv1));
  Tensor logits = conv2d(x, s.pred_conv2);
  return {x, DepthDistribution{softmax(logits, 0)}};
}

Tensor merge_bins(const DepthDistribution& dist, const DfeState& s) {
  if (dist.num_bins() != s.num_bins) throw CheckError("merge_bins: bin count mismatch");
  Tensor raw = conv2d(dist.probs, s.merge_conv);
  return normalize_sum(relu(raw), 0);
}

Tensor depth_prototypes(const Tensor& xp, const Tensor& merged) {
  if (xp.rank() != 3 || merged.rank() != 3 || xp.dim(1) != merged.dim(1) ||
      xp.dim(2) != merged.dim(2))
    throw CheckError("depth_prototypes: spatial shape mismatch");
  const int c = xp.dim(0), dp = merged.dim(0);
  const int n = xp.dim(1) * xp.dim(2);
  Tensor weights = normalize_sum(reshape(merged, {dp, n}), 1);
  return matmul(weights, transpose(reshape(xp, {c, n})));  // [D', C]
}

Tensor reconstruct(const Tensor& merged, const Tensor& protos) {
  if (merged.rank() != 3 || protos.rank() != 2 || merged.dim(0) != protos.dim(0))
    throw CheckError("reconstruct: prototype count mismatch");
  const int dp = merged.dim(0), c = protos.dim(1);
  const int h = merged.dim(1), w = merged.dim(2);
  Tensor flat = matmul(transpose(protos), reshape(merged, {dp, h * w}));  // [C, N]
  return reshape(flat, {c, h, w});
}

Tensor enhance(const Tensor& x, const Tensor& reconstructed, const DfeState& s) {
  if (x.shape() != reconstructed.shape()) throw CheckError("enhance: shape mismatch");
  return conv2d(concat({x, reconstructed}, 0), s.fuse_conv);
}

Tensor dfe_forward(const Tensor& feat, const DfeState& s, DepthDistribution* dist_out) {
  auto [x, dist] = predict_depth(feat, s);
  Tensor merged = merge_bins(dist, s);
  Tensor protos = depth_prototypes(x, merged);
  Tensor rec = reconstruct(merged, protos);
  if (dist_out) *dist_out = dist;
  return enhance(x, rec, s);
}

}  // namespace mono3d
