#pragma once

#include <string>
#include <vector>

#include "mono3d/tensor.hpp"

namespace mono3d {

inline constexpr int kInvalidBin = -1;

enum class DiscMethod { UD, SID, LID };

DiscMethod disc_method_from_string(const std::string& s);
std::string to_string(DiscMethod m);

// Depth discretization scheme over [d_min, d_max) with D bins.
struct DepthBinSpec {
  double d_min = 1.0;
  double d_max = 80.0;
  int num_bins = 96;
  DiscMethod method = DiscMethod::LID;

  void validate() const;
};

// Bin edges, D+1 values, strictly increasing, exact at both endpoints.
// LID: edge(i) = d_min + (d_max-d_min) * i*(i+1) / (D*(D+1))
// UD:  equal widths. SID: equal widths in log space.
std::vector<double> boundaries(const DepthBinSpec& spec);

// Bin index i with edge(i) <= d < edge(i+1); kInvalidBin outside [d_min, d_max).
// Binary search over the edges so all three methods share one code path.
int depth_to_bin(const DepthBinSpec& spec, double d);

// Per-pixel ground-truth bin map. Pixels never hit by a projected point stay
// invalid and are excluded from every loss term.
struct DepthTargetMap {
  int height = 0;
  int width = 0;
  std::vector<int> bins;        // H*W row-major, kInvalidBin where unset
  std::vector<double> depths;   // nearest source depth per pixel (debug/collision bookkeeping)

  bool valid(int y, int x) const { return bins[static_cast<size_t>(y) * width + x] >= 0; }
  int valid_count() const;
};

struct DepthPoint {
  double u = 0, v = 0;  // pixels
  double depth = 0;     // meters
};

// Writes each in-range point's bin at (round(v), round(u)); the nearer depth
// wins pixel collisions. Out-of-range depths are skipped.
DepthTargetMap rasterize_depth_gt(const std::vector<DepthPoint>& points, int height, int width,
                                  const DepthBinSpec& spec);

struct DepthLoss {
  Tensor loss;           // scalar
  bool no_valid_pixels;  // loss forced to 0, flagged for the caller
};

// Mean over valid pixels of FL(p) = -alpha * (1-p)^gamma * log(p) applied to
// the probability the prediction assigns to the target bin.
DepthLoss depth_focal_loss(const Tensor& pred_probs /*[D,H,W]*/, const DepthTargetMap& target,
                           double gamma = 2.0, double alpha = 0.25);

// ASCII fixture format: "DBIN H W D" header, then H rows of W integers.
std::string serialize_dbin(const DepthTargetMap& m, int num_bins);
DepthTargetMap parse_dbin(const std::string& text, int* num_bins_out = nullptr);

}  // namespace mono3d
