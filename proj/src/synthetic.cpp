#include "mono3d/synthetic.hpp"

#include <cmath>

namespace mono3d {

GtBox SceneBox::to_gt(const Calibration& calib) const {
  GtBox g;
  g.box2d = bbox;
  ProjectedPoint c = project_point({x, y, z}, calib);
  g.xp = c.u;
  g.yp = c.v;
  g.z = c.depth;
  g.w3d = w3d;
  g.h3d = h3d;
  g.l3d = l3d;
  g.theta = alpha;
  g.cls = cls;
  return g;
}

EvalBox3D SceneBox::to_eval() const { return {x, y, z, w3d, h3d, l3d, ry}; }

KittiLabel SceneBox::to_label(int, const std::vector<std::string>& names) const {
  KittiLabel l;
  l.type = cls < static_cast<int>(names.size()) ? names[cls] : "Unknown";
  l.alpha = alpha;
  l.bbox = bbox;
  l.dims = {h3d, w3d, l3d};
  l.location = {x, y + h3d / 2, z};  // bottom-center
  l.rotation_y = ry;
  return l;
}

SceneParams SceneParams::from_config(const RunConfig& cfg) {
  SceneParams p;
  p.channels = cfg.get_int("C");
  p.feat_h = cfg.get_int("H");
  p.feat_w = cfg.get_int("W");
  p.stride = cfg.get_int("stride");
  p.num_boxes = cfg.get_int("scene_boxes");
  p.num_classes = static_cast<int>(cfg.get_names("classes").size());
  p.ratios = cfg.get_list("ratios");
  p.scales = cfg.scales();
  return p;
}

namespace {

// A box is usable only if some anchor template placed on the stride grid
// clears the 0.5 assignment threshold; the generator resamples until true.
bool has_anchor_coverage(const std::array<double, 4>& bbox, const SceneParams& p) {
  const double bw = bbox[2] - bbox[0], bh = bbox[3] - bbox[1];
  const double bcx = (bbox[0] + bbox[2]) / 2, bcy = (bbox[1] + bbox[3]) / 2;
  // nearest grid-cell center
  auto snap = [&](double v, int n) {
    double cell = std::clamp(std::floor(v / p.stride - 0.5) + 0.5, 0.5, n - 0.5);
    double best = 1e300, out = 0;
    for (double c : {cell, cell + 1}) {
      if (c > n - 0.5 + 1e-9) continue;
      double px = c * p.stride;
      if (std::abs(px - v) < best) {
        best = std::abs(px - v);
        out = px;
      }
    }
    return out;
  };
  const double ax = snap(bcx, p.feat_w), ay = snap(bcy, p.feat_h);
  for (double ratio : p.ratios)
    for (double s : p.scales) {
      const std::array<double, 4> anchor = {ax - s * ratio / 2, ay - s / 2, ax + s * ratio / 2,
                                            ay + s / 2};
      const std::array<double, 4> box = {bcx - bw / 2, bcy - bh / 2, bcx + bw / 2, bcy + bh / 2};
      if (iou_2d(anchor, box) > 0.60) return true;  // margin over the assignment threshold
    }
  return false;
}

// Random point on the surface of the box, camera frame.
std::array<double, 3> sample_surface_point(const SceneBox& b, Rng& rng) {
  const double hw = b.w3d / 2, hh = b.h3d / 2, hl = b.l3d / 2;
  // pick a face weighted by area
  const double a_lw = b.l3d * b.w3d;  // top/bottom
  const double a_lh = b.l3d * b.h3d;  // sides
  const double a_wh = b.w3d * b.h3d;  // front/back
  const double total = 2 * (a_lw + a_lh + a_wh);
  double pick = rng.uniform(0, total);
  double u = rng.uniform(-1, 1), v = rng.uniform(-1, 1);
  double lx, ly, lz;
  if (pick < 2 * a_lw) {
    lx = u * hl;
    lz = v * hw;
    ly = pick < a_lw ? -hh : hh;
  } else if (pick < 2 * a_lw + 2 * a_lh) {
    lx = u * hl;
    ly = v * hh;
    lz = (pick < 2 * a_lw + a_lh) ? -hw : hw;
  } else {
    lz = u * hw;
    ly = v * hh;
    lx = (pick - 2 * a_lw - 2 * a_lh < a_wh) ? -hl : hl;
  }
  const double c = std::cos(b.ry), s = std::sin(b.ry);
  return {b.x + lx * c + lz * s, b.y + ly, b.z - lx * s + lz * c};
}

}  // namespace

SyntheticScene make_scene(const SceneParams& p, Rng rng) {
  SyntheticScene scene;
  scene.image_w = p.feat_w * p.stride;
  scene.image_h = p.feat_h * p.stride;
  const double f = scene.image_h;  // box heights land in the anchor scale range
  scene.calib = Calibration::simple(f, scene.image_w / 2.0, scene.image_h / 2.0);

  Rng box_rng = rng.fork(1);
  for (int b = 0; b < p.num_boxes; ++b) {
    for (int attempt = 0; attempt < 400; ++attempt) {
      SceneBox box;
      box.cls = b % p.num_classes;
      box.z = box_rng.uniform(8.0, 18.0);
      box.w3d = box_rng.uniform(1.45, 1.75);
      box.h3d = box_rng.uniform(1.35, 1.65);
      box.l3d = box_rng.uniform(3.4, 4.3);
      // frontal-ish observation angles keep 2D aspect within the templates
      box.alpha = box_rng.uniform(-0.35, 0.35);
      const double span_x = 0.35 * box.z * scene.image_w / (2 * f);
      box.x = box_rng.uniform(-span_x, span_x);
      box.y = box_rng.uniform(-0.3, 0.5);
      box.ry = ry_from_alpha(box.alpha, box.x, box.z);
      box.bbox = project_box3d({box.x, box.y + box.h3d / 2, box.z},
                               {box.h3d, box.w3d, box.l3d}, box.ry, scene.calib);
      // fully inside the image with a margin
      const double m = 2.0;
      if (box.bbox[0] < m || box.bbox[1] < m || box.bbox[2] > scene.image_w - m ||
          box.bbox[3] > scene.image_h - m)
        continue;
      if (!has_anchor_coverage(box.bbox, p)) continue;
      // keep scenes NMS-friendly: no heavy mutual overlap
      bool crowded = false;
      for (const SceneBox& other : scene.boxes)
        if (iou_2d(box.bbox, other.bbox) > 0.3) crowded = true;
      if (crowded) continue;
      scene.boxes.push_back(box);
      break;
    }
  }
  if (scene.boxes.size() != static_cast<size_t>(p.num_boxes))
    throw CheckError("make_scene: failed to place boxes with anchor coverage");

  // exact sparse depth from box surfaces
  Rng point_rng = rng.fork(2);
  for (const SceneBox& b : scene.boxes)
    for (int i = 0; i < p.points_per_box; ++i) {
      auto q = project_point(sample_surface_point(b, point_rng), scene.calib);
      if (q.depth <= 0) continue;
      if (q.u < 0 || q.u >= scene.image_w || q.v < 0 || q.v >= scene.image_h) continue;
      scene.depth_points.push_back({q.u, q.v, q.depth});
    }

  // smoothed random field with per-box signature bumps
  Rng feat_rng = rng.fork(3);
  const int C = p.channels, H = p.feat_h, W = p.feat_w;
  std::vector<double> field(static_cast<size_t>(C) * H * W);
  for (auto& v : field) v = feat_rng.uniform(-0.5, 0.5);
  for (size_t bi = 0; bi < scene.boxes.size(); ++bi) {
    const SceneBox& b = scene.boxes[bi];
    auto c2d = project_point({b.x, b.y, b.z}, scene.calib);
    const double cx = c2d.u / p.stride, cy = c2d.v / p.stride;
    const double sx = std::max(0.8, (b.bbox[2] - b.bbox[0]) / p.stride / 3);
    const double sy = std::max(0.8, (b.bbox[3] - b.bbox[1]) / p.stride / 3);
    const double keys[6] = {2.0,
                            2.0 * (b.z - 13.0) / 5.0,
                            2.0 * std::sin(b.alpha),
                            2.0 * std::cos(b.alpha),
                            5.0 * (b.w3d - 1.6),
                            2.0 * (b.l3d - 3.85)};
    for (int k = 0; k < 6; ++k) {
      const int ch = static_cast<int>((b.cls * 11 + k * 5 + 1) % C);
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          const double dx = (x + 0.5 - cx) / sx, dy = (y + 0.5 - cy) / sy;
          field[(static_cast<size_t>(ch) * H + y) * W + x] +=
              keys[k] * std::exp(-(dx * dx + dy * dy) / 2);
        }
    }
  }
  // one 3x3 box-blur pass
  std::vector<double> blurred(field.size());
  for (int ch = 0; ch < C; ++ch)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        double acc = 0;
        int n = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = y + dy, xx = x + dx;
            if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
            acc += field[(static_cast<size_t>(ch) * H + yy) * W + xx];
            ++n;
          }
        blurred[(static_cast<size_t>(ch) * H + y) * W + x] = acc / n;
      }
  scene.features = Tensor::from_data({C, H, W}, std::move(blurred));
  return scene;
}

}  // namespace mono3d
