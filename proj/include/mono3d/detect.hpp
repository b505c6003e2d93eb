#pragma once

#include <array>
#include <string>
#include <vector>

#include "mono3d/kittiio.hpp"
#include "mono3d/tensor.hpp"

namespace mono3d {

// 11-parameter 2D-3D anchor template instantiated at a pixel: 2D box center
// and size, projected 3D center (tied to the 2D center), depth, physical
// dimensions, and observation angle.
struct Anchor2D3D {
  double x2d = 0, y2d = 0, w2d = 1, h2d = 1;  // pixels
  double xp = 0, yp = 0;                      // pixels, projected 3D center
  double z = 10;                              // meters, depth prior
  double w3d = 1, h3d = 1, l3d = 1;           // meters
  double theta = 0;                           // radians, observation angle
};

// Per-(ratio, scale) statistics of the ground truth used as anchor priors.
struct AnchorPriors {
  // mean and variance of (z, w3d, h3d, l3d, theta) per template
  std::vector<std::array<double, 5>> mean;
  std::vector<std::array<double, 5>> variance;
  std::array<double, 5> global_mean{};
  std::array<double, 5> global_variance{};
  std::vector<int> counts;
};

struct AnchorGrid {
  int height = 0, width = 0, stride = 8;
  int templates_per_pixel = 0;
  std::vector<Anchor2D3D> anchors;  // ordered (y, x, template)

  int64_t size() const { return static_cast<int64_t>(anchors.size()); }
  int64_t index(int y, int x, int t) const {
    return (static_cast<int64_t>(y) * width + x) * templates_per_pixel + t;
  }
};

// Height scales following 24 * 2^(i/4). The stated anchor budget only works
// out with 16 of them; 12 stays available as a config alternative.
std::vector<double> exponential_scales(int count = 16);

// Ground-truth box in the detector's working frame: projected 2D box,
// projected center, depth, dims, observation angle, class.
struct GtBox {
  std::array<double, 4> box2d{};  // x1, y1, x2, y2
  double xp = 0, yp = 0;          // projected 3D center, pixels
  double z = 0;                   // meters
  double w3d = 0, h3d = 0, l3d = 0;
  double theta = 0;  // observation angle
  int cls = 0;
};

AnchorPriors compute_anchor_priors(const std::vector<GtBox>& gts,
                                   const std::vector<double>& ratios,
                                   const std::vector<double>& scales);

AnchorGrid generate_anchors(int height, int width, int stride, const std::vector<double>& ratios,
                            const std::vector<double>& scales, const AnchorPriors& priors);

// Axis-aligned IoU over (x1, y1, x2, y2) boxes; degenerate boxes give 0.
double iou_2d(const std::array<double, 4>& a, const std::array<double, 4>& b);

// Per-anchor assignment: the argmax ground truth when its IoU exceeds 0.5,
// ties broken toward the lower ground-truth index; -1 for negatives.
std::vector<int> assign_targets(const AnchorGrid& anchors, const std::vector<GtBox>& gts,
                                double iou_thresh = 0.5);

// Residual targets in the fixed layout
// [tx2d ty2d tw2d th2d tx3d ty3d tw3d th3d tl3d tz ttheta].
inline constexpr int kNumRegression = 11;
std::array<double, kNumRegression> encode_targets(const GtBox& gt, const Anchor2D3D& anchor);

struct DecodedBox {
  double x2d = 0, y2d = 0, w2d = 0, h2d = 0;  // center + size
  double xp = 0, yp = 0, z = 0;
  double w3d = 0, h3d = 0, l3d = 0;
  double theta = 0;
  bool clamped = false;  // a dimension residual hit the exp clamp

  std::array<double, 4> corners2d() const {
    return {x2d - w2d / 2, y2d - h2d / 2, x2d + w2d / 2, y2d + h2d / 2};
  }
};

DecodedBox decode(const std::array<double, kNumRegression>& t, const Anchor2D3D& anchor);

struct DetectionLossCfg {
  double gamma = 2.0;
  double alpha = 0.25;
  double w_cls = 1.0;
  double w_reg = 1.0;
};

struct DetectionLossOut {
  Tensor total, cls, reg;
  int num_positive = 0;
};

// preds: [A, 11 + K] (regression residuals then per-class logits).
// Classification is one-vs-all focal with implicit background over every
// anchor; regression is smooth-L1 over positive anchors' residuals. Both
// terms normalize by max(1, positives).
DetectionLossOut detection_loss(const Tensor& preds, const std::vector<int>& assignment,
                                const std::vector<GtBox>& gts, const AnchorGrid& anchors,
                                int num_classes, const DetectionLossCfg& cfg = {});

struct Detection3D {
  int cls = 0;
  double score = 0;
  std::array<double, 4> box2d{};     // x1, y1, x2, y2
  std::array<double, 3> center3d{};  // geometric center, camera frame
  double w3d = 0, h3d = 0, l3d = 0;
  double ry = 0;  // global yaw
};

// Greedy score-descending suppression on 2D IoU; input order breaks ties.
std::vector<Detection3D> nms(const std::vector<Detection3D>& dets, double iou_thresh,
                             double score_thresh);

// (xp, yp, z) to camera-frame center through the calibration.
std::array<double, 3> backproject_center(double xp, double yp, double z, const Calibration& c);

// Scored KITTI result rows (type, -1, -1, alpha, box2d, h w l, bottom-center
// location, ry, score), one line per detection.
std::string serialize_detections(const std::vector<Detection3D>& dets,
                                 const std::vector<std::string>& class_names,
                                 FloatFormat fmt = FloatFormat::Compat2);

}  // namespace mono3d
