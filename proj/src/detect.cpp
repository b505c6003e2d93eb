#include "mono3d/detect.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mono3d {

std::vector<double> exponential_scales(int count) {
  std::vector<double> s(count);
  for (int i = 0; i < count; ++i) s[i] = 24.0 * std::pow(2.0, i / 4.0);
  return s;
}

namespace {

// Size-only IoU with both boxes centered at the origin, used to bucket
// ground truth onto its closest template.
double centered_iou(double w1, double h1, double w2, double h2) {
  double inter = std::min(w1, w2) * std::min(h1, h2);
  double uni = w1 * h1 + w2 * h2 - inter;
  return uni > 0 ? inter / uni : 0.0;
}

constexpr double kExpClamp = 10.0;

double clamp_exp(double t, bool* clamped) {
  if (t > kExpClamp || t < -kExpClamp) {
    *clamped = true;
    t = std::clamp(t, -kExpClamp, kExpClamp);
  }
  return std::exp(t);
}

}  // namespace

AnchorPriors compute_anchor_priors(const std::vector<GtBox>& gts,
                                   const std::vector<double>& ratios,
                                   const std::vector<double>& scales) {
  if (gts.empty()) throw CheckError("anchor priors: no ground truth boxes");
  if (ratios.empty() || scales.empty()) throw CheckError("anchor priors: empty templates");
  const int nt = static_cast<int>(ratios.size() * scales.size());

  AnchorPriors pr;
  pr.mean.assign(nt, {});
  pr.variance.assign(nt, {});
  pr.counts.assign(nt, 0);

  // Welford running statistics per template plus a global accumulator.
  std::vector<std::array<double, 5>> m2(nt, std::array<double, 5>{});
  std::array<double, 5> gmean{}, gm2{};
  int gcount = 0;

  for (const GtBox& g : gts) {
    const double gw = g.box2d[2] - g.box2d[0], gh = g.box2d[3] - g.box2d[1];
    int best = 0;
    double best_iou = -1.0;
    for (size_t r = 0; r < ratios.size(); ++r)
      for (size_t s = 0; s < scales.size(); ++s) {
        double iou = centered_iou(gw, gh, scales[s] * ratios[r], scales[s]);
        int t = static_cast<int>(r * scales.size() + s);
        if (iou > best_iou) {
          best_iou = iou;
          best = t;
        }
      }
    const std::array<double, 5> v = {g.z, g.w3d, g.h3d, g.l3d, g.theta};
    int& n = pr.counts[best];
    ++n;
    ++gcount;
    for (int k = 0; k < 5; ++k) {
      double d = v[k] - pr.mean[best][k];
      pr.mean[best][k] += d / n;
      m2[best][k] += d * (v[k] - pr.mean[best][k]);
      double gd = v[k] - gmean[k];
      gmean[k] += gd / gcount;
      gm2[k] += gd * (v[k] - gmean[k]);
    }
  }

  pr.global_mean = gmean;
  for (int k = 0; k < 5; ++k) pr.global_variance[k] = gm2[k] / gcount;
  for (int t = 0; t < nt; ++t) {
    if (pr.counts[t] == 0) {
      pr.mean[t] = pr.global_mean;  // empty templates inherit the global stats
      pr.variance[t] = pr.global_variance;
    } else {
      for (int k = 0; k < 5; ++k) pr.variance[t][k] = m2[t][k] / pr.counts[t];
    }
  }
  return pr;
}

AnchorGrid generate_anchors(int height, int width, int stride, const std::vector<double>& ratios,
                            const std::vector<double>& scales, const AnchorPriors& priors) {
  if (ratios.empty() || scales.empty()) throw CheckError("generate_anchors: empty templates");
  const int nt = static_cast<int>(ratios.size() * scales.size());
  if (static_cast<int>(priors.mean.size()) != nt)
    throw CheckError("generate_anchors: priors/template count mismatch");

  AnchorGrid grid;
  grid.height = height;
  grid.width = width;
  grid.stride = stride;
  grid.templates_per_pixel = nt;
  grid.anchors.reserve(static_cast<size_t>(height) * width * nt);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (size_t r = 0; r < ratios.size(); ++r)
        for (size_t s = 0; s < scales.size(); ++s) {
          const int t = static_cast<int>(r * scales.size() + s);
          Anchor2D3D a;
          a.x2d = (x + 0.5) * stride;
          a.y2d = (y + 0.5) * stride;
          a.h2d = scales[s];
          a.w2d = scales[s] * ratios[r];
          a.xp = a.x2d;
          a.yp = a.y2d;
          a.z = priors.mean[t][0];
          a.w3d = priors.mean[t][1];
          a.h3d = priors.mean[t][2];
          a.l3d = priors.mean[t][3];
          a.theta = priors.mean[t][4];
          grid.anchors.push_back(a);
        }
  return grid;
}

double iou_2d(const std::array<double, 4>& a, const std::array<double, 4>& b) {
  const double aw = a[2] - a[0], ah = a[3] - a[1];
  const double bw = b[2] - b[0], bh = b[3] - b[1];
  if (aw <= 0 || ah <= 0 || bw <= 0 || bh <= 0) return 0.0;
  const double ix = std::min(a[2], b[2]) - std::max(a[0], b[0]);
  const double iy = std::min(a[3], b[3]) - std::max(a[1], b[1]);
  if (ix <= 0 || iy <= 0) return 0.0;
  const double inter = ix * iy;
  return inter / (aw * ah + bw * bh - inter);
}

std::vector<int> assign_targets(const AnchorGrid& anchors, const std::vector<GtBox>& gts,
                                double iou_thresh) {
  std::vector<int> out(anchors.anchors.size(), -1);
  if (gts.empty()) return out;
  for (size_t i = 0; i < anchors.anchors.size(); ++i) {
    const Anchor2D3D& a = anchors.anchors[i];
    const std::array<double, 4> abox = {a.x2d - a.w2d / 2, a.y2d - a.h2d / 2,
                                        a.x2d + a.w2d / 2, a.y2d + a.h2d / 2};
    double best = iou_thresh;  // strictly greater than the threshold qualifies
    int match = -1;
    for (size_t g = 0; g < gts.size(); ++g) {
      double iou = iou_2d(abox, gts[g].box2d);
      if (iou > best) {
        best = iou;
        match = static_cast<int>(g);
      }
    }
    out[i] = match;
  }
  return out;
}

std::array<double, kNumRegression> encode_targets(const GtBox& gt, const Anchor2D3D& anchor) {
  if (gt.w3d <= 0 || gt.h3d <= 0 || gt.l3d <= 0)
    throw CheckError("encode_targets: non-positive ground-truth dimensions");
  const double gw = gt.box2d[2] - gt.box2d[0], gh = gt.box2d[3] - gt.box2d[1];
  if (gw <= 0 || gh <= 0) throw CheckError("encode_targets: degenerate 2D box");
  const double gcx = (gt.box2d[0] + gt.box2d[2]) / 2, gcy = (gt.box2d[1] + gt.box2d[3]) / 2;
  return {
      (gcx - anchor.x2d) / anchor.w2d,
      (gcy - anchor.y2d) / anchor.h2d,
      std::log(gw / anchor.w2d),
      std::log(gh / anchor.h2d),
      (gt.xp - anchor.xp) / anchor.w2d,
      (gt.yp - anchor.yp) / anchor.h2d,
      std::log(gt.w3d / anchor.w3d),
      std::log(gt.h3d / anchor.h3d),
      std::log(gt.l3d / anchor.l3d),
      gt.z - anchor.z,
      gt.theta - anchor.theta,
  };
}

DecodedBox decode(const std::array<double, kNumRegression>& t, const Anchor2D3D& a) {
  DecodedBox d;
  d.x2d = t[0] * a.w2d + a.x2d;
  d.y2d = t[1] * a.h2d + a.y2d;
  d.w2d = clamp_exp(t[2], &d.clamped) * a.w2d;
  d.h2d = clamp_exp(t[3], &d.clamped) * a.h2d;
  d.xp = t[4] * a.w2d + a.xp;
  d.yp = t[5] * a.h2d + a.yp;
  d.w3d = clamp_exp(t[6], &d.clamped) * a.w3d;
  d.h3d = clamp_exp(t[7], &d.clamped) * a.h3d;
  d.l3d = clamp_exp(t[8], &d.clamped) * a.l3d;
  d.z = t[9] + a.z;
  d.theta = t[10] + a.theta;
  return d;
}

DetectionLossOut detection_loss(const Tensor& preds, const std::vector<int>& assignment,
                                const std::vector<GtBox>& gts, const AnchorGrid& anchors,
                                int num_classes, const DetectionLossCfg& cfg) {
  const int64_t a_count = anchors.size();
  if (preds.rank() != 2 || preds.dim(0) != a_count ||
      preds.dim(1) != kNumRegression + num_classes)
    throw CheckError("detection_loss: prediction shape mismatch");
  if (static_cast<int64_t>(assignment.size()) != a_count)
    throw CheckError("detection_loss: assignment length mismatch");

  std::vector<int> positives;
  for (int64_t i = 0; i < a_count; ++i) {
    if (assignment[i] < 0) continue;
    if (assignment[i] >= static_cast<int>(gts.size()))
      throw CheckError("detection_loss: assignment references a missing ground truth");
    positives.push_back(static_cast<int>(i));
  }
  const int npos = static_cast<int>(positives.size());
  const double norm = std::max(1, npos);

  // one-vs-all focal classification over every anchor
  Tensor logits = slice(preds, 1, kNumRegression, num_classes);
  std::vector<double> tgt(static_cast<size_t>(a_count) * num_classes, 0.0);
  for (int idx : positives)
    tgt[static_cast<size_t>(idx) * num_classes + gts[assignment[idx]].cls] = 1.0;
  Tensor t = Tensor::from_data({static_cast<int>(a_count), num_classes}, std::move(tgt));
  Tensor p = sigmoid(logits);
  Tensor pos_term = mul(t, scale(mul(pow_scalar(sub(1.0, p), cfg.gamma), softplus(neg(logits))),
                                 cfg.alpha));
  Tensor neg_term = mul(sub(1.0, t),
                        scale(mul(pow_scalar(p, cfg.gamma), softplus(logits)), 1.0 - cfg.alpha));
  Tensor cls = scale(sum_all(add(pos_term, neg_term)), 1.0 / norm);

  // smooth-L1 over positive anchors' residuals
  Tensor reg;
  if (npos == 0) {
    reg = Tensor::scalar(0.0);
  } else {
    std::vector<double> target_rows(static_cast<size_t>(npos) * kNumRegression);
    for (int i = 0; i < npos; ++i) {
      auto enc = encode_targets(gts[assignment[positives[i]]],
                                anchors.anchors[positives[i]]);
      std::copy(enc.begin(), enc.end(), target_rows.begin() + i * kNumRegression);
    }
    Tensor pred_rows = gather_rows(slice(preds, 1, 0, kNumRegression), positives);
    Tensor tgt_rows = Tensor::from_data({npos, kNumRegression}, std::move(target_rows));
    reg = scale(sum_all(smooth_l1(sub(pred_rows, tgt_rows))), 1.0 / norm);
  }

  DetectionLossOut out;
  out.cls = cls;
  out.reg = reg;
  out.total = add(scale(cls, cfg.w_cls), scale(reg, cfg.w_reg));
  out.num_positive = npos;
  return out;
}

std::vector<Detection3D> nms(const std::vector<Detection3D>& dets, double iou_thresh,
                             double score_thresh) {
  std::vector<int> order;
  for (size_t i = 0; i < dets.size(); ++i)
    if (dets[i].score >= score_thresh) order.push_back(static_cast<int>(i));
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return dets[a].score > dets[b].score; });
  std::vector<Detection3D> kept;
  for (int idx : order) {
    bool suppressed = false;
    for (const Detection3D& k : kept)
      if (iou_2d(dets[idx].box2d, k.box2d) > iou_thresh) {
        suppressed = true;
        break;
      }
    if (!suppressed) kept.push_back(dets[idx]);
  }
  return kept;
}

std::array<double, 3> backproject_center(double xp, double yp, double z, const Calibration& c) {
  return backproject(xp, yp, z, c);
}

std::string serialize_detections(const std::vector<Detection3D>& dets,
                                 const std::vector<std::string>& class_names, FloatFormat fmt) {
  std::vector<KittiLabel> rows;
  rows.reserve(dets.size());
  for (const Detection3D& d : dets) {
    KittiLabel l;
    l.type = (d.cls >= 0 && d.cls < static_cast<int>(class_names.size()))
                 ? class_names[d.cls]
                 : "Unknown";
    l.truncated = -1;
    l.occluded = -1;
    l.bbox = d.box2d;
    l.dims = {d.h3d, d.w3d, d.l3d};
    // stored center is geometric; the file format wants the bottom-center
    l.location = {d.center3d[0], d.center3d[1] + d.h3d / 2, d.center3d[2]};
    l.rotation_y = d.ry;
    l.alpha = alpha_from_ry(d.ry, d.center3d[0], d.center3d[2]);
    l.score = d.score;
    rows.push_back(std::move(l));
  }
  std::string text = serialize_labels(rows, fmt);
  return text;
}

}  // namespace mono3d
