#include "mono3d/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mono3d {

std::array<std::array<double, 2>, 4> bev_corners(const BevRect& r) {
  const double c = std::cos(r.yaw), s = std::sin(r.yaw);
  std::array<std::array<double, 2>, 4> out;
  // counter-clockwise in the (x, z) plane
  const double hl = r.l / 2, hw = r.w / 2;
  const double us[4] = {-hl, hl, hl, -hl};
  const double vs[4] = {-hw, -hw, hw, hw};
  for (int i = 0; i < 4; ++i)
    out[i] = {r.cx + us[i] * c + vs[i] * s, r.cz - us[i] * s + vs[i] * c};
  return out;
}

namespace {

using Point = std::array<double, 2>;
using Poly = std::vector<Point>;

double polygon_area(const Poly& p) {
  double a = 0;
  for (size_t i = 0; i < p.size(); ++i) {
    const Point& q = p[i];
    const Point& r = p[(i + 1) % p.size()];
    a += q[0] * r[1] - r[0] * q[1];
  }
  return std::abs(a) / 2;
}

// Clip `subject` against the half-plane left of edge a->b.
Poly clip_edge(const Poly& subject, const Point& a, const Point& b) {
  Poly out;
  auto side = [&](const Point& p) {
    return (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
  };
  for (size_t i = 0; i < subject.size(); ++i) {
    const Point& p = subject[i];
    const Point& q = subject[(i + 1) % subject.size()];
    const double sp = side(p), sq = side(q);
    if (sp >= 0) out.push_back(p);
    if ((sp >= 0) != (sq >= 0)) {
      const double t = sp / (sp - sq);
      out.push_back({p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])});
    }
  }
  return out;
}

double intersection_area(const BevRect& a, const BevRect& b) {
  auto ca = bev_corners(a);
  auto cb = bev_corners(b);
  Poly poly(ca.begin(), ca.end());
  for (int i = 0; i < 4 && !poly.empty(); ++i)
    poly = clip_edge(poly, cb[i], cb[(i + 1) % 4]);
  return poly.empty() ? 0.0 : polygon_area(poly);
}

}  // namespace

double iou_bev(const BevRect& a, const BevRect& b) {
  if (a.w <= 0 || a.l <= 0 || b.w <= 0 || b.l <= 0) return 0.0;
  const double inter = intersection_area(a, b);
  const double uni = a.w * a.l + b.w * b.l - inter;
  return uni > 0 ? inter / uni : 0.0;
}

double iou_3d(const EvalBox3D& a, const EvalBox3D& b) {
  if (a.w <= 0 || a.h <= 0 || a.l <= 0 || b.w <= 0 || b.h <= 0 || b.l <= 0) return 0.0;
  const double inter_bev = intersection_area(a.bev(), b.bev());
  const double oy =
      std::min(a.cy + a.h / 2, b.cy + b.h / 2) - std::max(a.cy - a.h / 2, b.cy - b.h / 2);
  const double inter = inter_bev * std::max(0.0, oy);
  const double uni = a.w * a.h * a.l + b.w * b.h * b.l - inter;
  return uni > 0 ? inter / uni : 0.0;
}

ApResult ap40(const std::vector<EvalEntry>& dets, const std::vector<EvalEntry>& gts,
              const IouFn& iou, double iou_thresh) {
  ApResult res;
  if (gts.empty()) return res;  // AP undefined, reported absent

  std::vector<int> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return dets[a].score > dets[b].score; });

  std::vector<bool> gt_matched(gts.size(), false);
  std::vector<double> precisions, recalls;
  int tp = 0, fp = 0;
  const int total_gt = static_cast<int>(gts.size());
  for (int di : order) {
    int best_gt = -1;
    double best_iou = 0;
    for (size_t gi = 0; gi < gts.size(); ++gi) {
      if (gt_matched[gi] || gts[gi].image_id != dets[di].image_id) continue;
      const double v = iou(dets[di].id, gts[gi].id);
      if (v > best_iou) {
        best_iou = v;
        best_gt = static_cast<int>(gi);
      }
    }
    if (best_gt >= 0 && best_iou >= iou_thresh) {
      gt_matched[best_gt] = true;
      res.matches.emplace_back(dets[di].id, gts[best_gt].id);
      ++tp;
    } else {
      ++fp;
    }
    precisions.push_back(static_cast<double>(tp) / (tp + fp));
    recalls.push_back(static_cast<double>(tp) / total_gt);
  }

  double sum = 0;
  for (int k = 1; k <= kRecallPositions; ++k) {
    const double r = static_cast<double>(k) / kRecallPositions;
    double best = 0;
    for (size_t i = 0; i < precisions.size(); ++i)
      if (recalls[i] >= r) best = std::max(best, precisions[i]);
    res.pr.push_back({r, best});
    sum += best;
  }
  res.ap = sum / kRecallPositions;
  return res;
}

namespace {

std::string json_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::string EvalReport::to_json() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < cells.size(); ++i) {
    const EvalCell& c = cells[i];
    os << (i ? ",\n " : "\n ") << "{\"class\":\"" << json_escape(c.cls) << "\",\"metric\":\""
       << c.metric << "\",\"iou\":" << c.iou_thresh << ",\"ap\":";
    if (c.result.ap)
      os << *c.result.ap;
    else
      os << "null";
    os << ",\"pr\":[";
    for (size_t k = 0; k < c.result.pr.size(); ++k)
      os << (k ? "," : "") << "[" << c.result.pr[k].recall << "," << c.result.pr[k].precision
         << "]";
    os << "]}";
  }
  os << "\n]\n";
  return os.str();
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << "class        metric  iou    AP40\n";
  for (const EvalCell& c : cells) {
    char buf[96];
    if (c.result.ap)
      std::snprintf(buf, sizeof buf, "%-12s %-6s %5.2f  %.4f\n", c.cls.c_str(),
                    c.metric.c_str(), c.iou_thresh, *c.result.ap);
    else
      std::snprintf(buf, sizeof buf, "%-12s %-6s %5.2f  absent\n", c.cls.c_str(),
                    c.metric.c_str(), c.iou_thresh);
    os << buf;
  }
  return os.str();
}

}  // namespace mono3d
