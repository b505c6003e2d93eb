#pragma once

#include <vector>

#include "mono3d/config.hpp"
#include "mono3d/depthbin.hpp"
#include "mono3d/detect.hpp"
#include "mono3d/eval.hpp"
#include "mono3d/kittiio.hpp"
#include "mono3d/tensor.hpp"

namespace mono3d {

// Camera-frame ground-truth box of a synthetic scene; (x, y, z) is the
// geometric center.
struct SceneBox {
  int cls = 0;
  double x = 0, y = 0, z = 10;
  double w3d = 1.6, h3d = 1.5, l3d = 3.9;
  double ry = 0;
  double alpha = 0;
  std::array<double, 4> bbox{};  // projected 2D box, image pixels

  GtBox to_gt(const Calibration& calib) const;
  EvalBox3D to_eval() const;
  KittiLabel to_label(int cls_count, const std::vector<std::string>& names) const;
};

// Deterministic pseudo-scene standing in for a real image + backbone: ground
// truth with guaranteed anchor coverage, exact depth points sampled from box
// surfaces, and a smoothed random feature field carrying bump signatures
// keyed to the boxes.
struct SyntheticScene {
  Calibration calib;
  int image_w = 0, image_h = 0;
  std::vector<SceneBox> boxes;
  std::vector<DepthPoint> depth_points;  // image-pixel (u, v) with metric depth
  Tensor features;                       // [C, H, W]
};

struct SceneParams {
  int channels = 32;
  int feat_h = 12, feat_w = 12;
  int stride = 8;
  int num_boxes = 2;
  int num_classes = 1;
  std::vector<double> ratios = {0.5, 1.0, 1.5};
  std::vector<double> scales = {7, 10, 14, 19};
  int points_per_box = 40;

  static SceneParams from_config(const RunConfig& cfg);
};

SyntheticScene make_scene(const SceneParams& p, Rng rng);

}  // namespace mono3d
