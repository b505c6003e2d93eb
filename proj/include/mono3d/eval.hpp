#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mono3d/common.hpp"

namespace mono3d {

// Ground-plane rectangle: center, size, yaw about the vertical axis.
struct BevRect {
  double cx = 0, cz = 0;
  double w = 1, l = 1;
  double yaw = 0;
};

// 3D box for evaluation: geometric center, dims, yaw about vertical.
struct EvalBox3D {
  double cx = 0, cy = 0, cz = 0;
  double w = 1, h = 1, l = 1;
  double yaw = 0;

  BevRect bev() const { return {cx, cz, w, l, yaw}; }
};

std::array<std::array<double, 2>, 4> bev_corners(const BevRect& r);

// Convex polygon intersection area over union (Sutherland-Hodgman clipping).
double iou_bev(const BevRect& a, const BevRect& b);

// BEV intersection area times vertical overlap, over the union of volumes.
double iou_3d(const EvalBox3D& a, const EvalBox3D& b);

inline constexpr int kRecallPositions = 40;

struct PrPoint {
  double recall = 0;
  double precision = 0;
};

struct ApResult {
  std::optional<double> ap;             // absent (not zero) when there are no GTs
  std::vector<PrPoint> pr;              // the 40 interpolated samples
  std::vector<std::pair<int, int>> matches;  // (det id, gt id) over the pooled inputs
};

// A detection or ground truth handed to the matcher; `iou` against another
// entry is computed by the caller-supplied function so 2D, BEV, and 3D reuse
// one matching pass. Entries are pooled across images via image_id.
struct EvalEntry {
  int image_id = 0;
  double score = 0;  // detections only
  int id = 0;        // caller-side identifier reported in the match trace
};

using IouFn = std::function<double(int det_id, int gt_id)>;

// Score-descending greedy matching against the highest-IoU unmatched GT of
// the same image; precision interpolated at the 40 recall positions.
ApResult ap40(const std::vector<EvalEntry>& dets, const std::vector<EvalEntry>& gts,
              const IouFn& iou, double iou_thresh);

struct EvalCell {
  std::string cls;
  std::string metric;  // AP2D | APBEV | AP3D
  double iou_thresh = 0.5;
  ApResult result;
};

struct EvalReport {
  std::vector<EvalCell> cells;

  std::string to_json() const;
  std::string to_text() const;
};

}  // namespace mono3d
