// Acceptance suite: one line per criterion, nonzero exit if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "mono3d/commands.hpp"
#include "mono3d/depthbin.hpp"
#include "mono3d/detect.hpp"
#include "mono3d/dfe.hpp"
#include "mono3d/dtr.hpp"
#include "mono3d/eval.hpp"
#include "mono3d/kittiio.hpp"
#include "mono3d/trainer.hpp"

using namespace mono3d;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void criterion(const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] %-22s %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double elapsed_s(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// criterion 1: gradient suite
// ---------------------------------------------------------------------------
void check_gradient_suite() {
  auto t0 = Clock::now();
  auto results = run_gradient_suite(20, 1e-5, 1e-4);
  const double secs = elapsed_s(t0);
  bool all = true;
  double worst = 0;
  std::string worst_name;
  for (const auto& r : results) {
    all = all && r.pass;
    if (r.max_rel_err > worst) {
      worst = r.max_rel_err;
      worst_name = r.name;
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu ops x 20 seeds, worst %.2e (%s), %.1fs",
                results.size(), worst, worst_name.c_str(), secs);
  criterion("gradient-suite", all && secs < 60.0, buf);
}

// ---------------------------------------------------------------------------
// criterion 2: equation oracles at 1e-12
// ---------------------------------------------------------------------------
double prototype_oracle_diff(Rng& r) {
  const int dp = r.uniform_int(2, 6), c = r.uniform_int(1, 6);
  const int h = r.uniform_int(2, 5), w = r.uniform_int(2, 5), n = h * w;
  Tensor merged = normalize_sum(Tensor::uniform({dp, h, w}, r, 0.0, 1.0), 0);
  Tensor xp = Tensor::uniform({c, h, w}, r, -2, 2);
  Tensor protos = depth_prototypes(xp, merged);
  Tensor rec = reconstruct(merged, protos);
  double diff = 0;
  for (int d = 0; d < dp; ++d) {
    double mass = 0;
    for (int i = 0; i < n; ++i) mass += merged.data()[d * n + i];
    for (int ch = 0; ch < c; ++ch) {
      double acc = 0;
      if (mass > 0)
        for (int i = 0; i < n; ++i)
          acc += merged.data()[d * n + i] / mass * xp.data()[ch * n + i];
      diff = std::max(diff, std::abs(protos.data()[d * c + ch] - acc));
    }
  }
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < n; ++i) {
      double acc = 0;
      for (int d = 0; d < dp; ++d)
        acc += merged.data()[d * n + i] * protos.data()[d * c + ch];
      diff = std::max(diff, std::abs(rec.data()[ch * n + i] - acc));
    }
  return diff;
}

double attention_oracle_diff(Rng& r) {
  const int n = r.uniform_int(2, 7), c = r.uniform_int(2, 6);
  Tensor q = Tensor::uniform({n, c}, r, -2, 2);
  Tensor k = Tensor::uniform({n, c}, r, -2, 2);
  Tensor v = Tensor::uniform({n, c}, r, -2, 2);
  Tensor got = attention_vanilla(q, k, v);
  double diff = 0;
  for (int i = 0; i < n; ++i) {
    std::vector<double> s(n);
    double mx = -1e300;
    for (int j = 0; j < n; ++j) {
      double dot = 0;
      for (int d = 0; d < c; ++d) dot += q.data()[i * c + d] * k.data()[j * c + d];
      s[j] = dot / std::sqrt(static_cast<double>(c));
      mx = std::max(mx, s[j]);
    }
    double z = 0;
    for (double& x : s) {
      x = std::exp(x - mx);
      z += x;
    }
    for (int d = 0; d < c; ++d) {
      double acc = 0;
      for (int j = 0; j < n; ++j) acc += s[j] / z * v.data()[j * c + d];
      diff = std::max(diff, std::abs(got.data()[i * c + d] - acc));
    }
  }
  return diff;
}

double depth_loss_oracle_diff(Rng& r) {
  const int d = r.uniform_int(3, 8), h = r.uniform_int(2, 4), w = r.uniform_int(2, 4);
  const double gamma = 2.0, alpha = 0.25;
  Tensor probs = softmax(Tensor::uniform({d, h, w}, r, -2, 2), 0);
  DepthTargetMap t;
  t.height = h;
  t.width = w;
  t.depths.assign(h * w, 0.0);
  for (int i = 0; i < h * w; ++i)
    t.bins.push_back(r.uniform() < 0.3 ? kInvalidBin : r.uniform_int(0, d - 1));
  if (t.valid_count() == 0) t.bins[0] = 0;
  double got = depth_focal_loss(probs, t, gamma, alpha).loss.value();
  double expect = 0;
  int n = 0;
  for (int i = 0; i < h * w; ++i) {
    if (t.bins[i] < 0) continue;
    double p = probs.data()[t.bins[i] * h * w + i];
    expect += -alpha * std::pow(1 - p, gamma) * std::log(p);
    ++n;
  }
  return std::abs(got - expect / n);
}

double detection_loss_oracle_diff(Rng& r, const AnchorGrid& grid) {
  const int K = 2;
  const double gamma = 2.0, alpha = 0.25;
  std::vector<GtBox> gts;
  const int ng = r.uniform_int(1, 3);
  for (int i = 0; i < ng; ++i) {
    GtBox g;
    double cx = r.uniform(10, 50), cy = r.uniform(10, 50);
    double w = r.uniform(6, 25), h = r.uniform(6, 20);
    g.box2d = {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
    g.xp = cx;
    g.yp = cy;
    g.z = r.uniform(6, 30);
    g.w3d = r.uniform(1.4, 1.8);
    g.h3d = r.uniform(1.3, 1.7);
    g.l3d = r.uniform(3.3, 4.4);
    g.theta = r.uniform(-kPi, kPi);
    g.cls = r.uniform_int(0, K - 1);
    gts.push_back(g);
  }
  auto assign = assign_targets(grid, gts);
  assign[r.uniform_int(0, static_cast<int>(grid.size()) - 1)] = 0;
  Tensor preds = Tensor::uniform({static_cast<int>(grid.size()), kNumRegression + K}, r, -2, 2);
  auto got = detection_loss(preds, assign, gts, grid, K);

  int npos = 0;
  double cls = 0, reg = 0;
  const int fdim = kNumRegression + K;
  for (int64_t i = 0; i < grid.size(); ++i) {
    const int gi = assign[i];
    if (gi >= 0) ++npos;
    for (int k = 0; k < K; ++k) {
      const double x = preds.data()[i * fdim + kNumRegression + k];
      const double p = 1.0 / (1.0 + std::exp(-x));
      const double sp_neg = std::max(-x, 0.0) + std::log1p(std::exp(-std::abs(x)));
      const double sp_pos = std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
      const bool on = gi >= 0 && gts[gi].cls == k;
      cls += on ? alpha * std::pow(1 - p, gamma) * sp_neg
                : (1 - alpha) * std::pow(p, gamma) * sp_pos;
    }
    if (gi >= 0) {
      auto enc = encode_targets(gts[gi], grid.anchors[i]);
      for (int k = 0; k < kNumRegression; ++k) {
        const double d = preds.data()[i * fdim + k] - enc[k];
        reg += std::abs(d) < 1 ? 0.5 * d * d : std::abs(d) - 0.5;
      }
    }
  }
  const double norm = std::max(1, npos);
  return std::max(std::abs(got.cls.value() - cls / norm),
                  std::abs(got.reg.value() - reg / norm));
}

void check_equation_oracles() {
  Rng rng(20260810);
  double worst = 0;
  AnchorPriors priors;
  priors.mean.assign(1, {15.0, 1.6, 1.5, 3.8, 0.1});
  priors.variance.assign(1, {});
  priors.counts.assign(1, 1);
  AnchorGrid grid = generate_anchors(3, 3, 16, {1.0}, {18.0}, priors);
  for (int trial = 0; trial < 120; ++trial) {
    Rng r1 = rng.fork(trial);
    Rng r2 = rng.fork(1000 + trial);
    Rng r3 = rng.fork(2000 + trial);
    Rng r4 = rng.fork(3000 + trial);
    worst = std::max({worst, prototype_oracle_diff(r1), attention_oracle_diff(r2),
                      depth_loss_oracle_diff(r3), detection_loss_oracle_diff(r4, grid)});
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "120 instances each, worst abs diff %.2e", worst);
  criterion("equation-oracles", worst < 1e-12, buf);
}

// ---------------------------------------------------------------------------
// criterion 3: linear attention identity, hull bound, benchmark scaling
// ---------------------------------------------------------------------------
void check_linear_attention() {
  Rng rng(7);
  double worst_id = 0;
  bool hull_ok = true;
  for (int trial = 0; trial < 1000; ++trial) {
    Rng r = rng.fork(trial);
    const int n = r.uniform_int(2, 10), c = r.uniform_int(2, 8);
    Tensor q = Tensor::uniform({n, c}, r, -3, 3);
    Tensor k = Tensor::uniform({n, c}, r, -3, 3);
    Tensor v = Tensor::uniform({n, c}, r, -3, 3);
    Tensor fast = attention_linear(q, k, v);
    Tensor slow = attention_linear_explicit(q, k, v);
    for (int64_t i = 0; i < fast.numel(); ++i)
      worst_id = std::max(worst_id, std::abs(fast.data()[i] - slow.data()[i]));
    for (int d = 0; d < c; ++d) {
      double lo = 1e300, hi = -1e300;
      for (int j = 0; j < n; ++j) {
        lo = std::min(lo, v.data()[j * c + d]);
        hi = std::max(hi, v.data()[j * c + d]);
      }
      for (int i = 0; i < n; ++i) {
        const double x = fast.data()[i * c + d];
        hull_ok = hull_ok && x >= lo - 1e-9 && x <= hi + 1e-9;
      }
    }
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "1000 trials, max |fast-explicit| %.2e, hull %s", worst_id,
                hull_ok ? "held" : "violated");
  criterion("linear-attention", worst_id < 1e-10 && hull_ok, buf);

  AttentionConfig cfg;
  cfg.model_dim = 32;
  cfg.heads = 1;
  auto rows = bench_attention(cfg, {2048, 4096}, 5, 1);
  double van[2] = {0, 0}, lin[2] = {0, 0};
  for (const auto& r : rows) {
    double* slot = r.kind == AttentionKind::Vanilla ? van : lin;
    slot[r.n == 2048 ? 0 : 1] = r.median_ms;
  }
  const double vr = van[1] / van[0], lr = lin[1] / lin[0];
  char buf2[128];
  std::snprintf(buf2, sizeof buf2,
                "2048->4096 ratios: vanilla %.2f (want 3.0..5.5), linear %.2f (want 1.5..2.8)",
                vr, lr);
  criterion("attention-benchmark", vr >= 3.0 && vr <= 5.5 && lr >= 1.5 && lr <= 2.8, buf2);
}

// ---------------------------------------------------------------------------
// criterion 4: discretization closed form
// ---------------------------------------------------------------------------
void check_discretization() {
  DepthBinSpec spec{1.0, 80.0, 96, DiscMethod::LID};
  auto e = boundaries(spec);
  bool ok = e.front() == 1.0 && e.back() == 80.0;
  const double delta = 2.0 * 79.0 / (96.0 * 97.0);
  double worst = 0;
  for (int i = 1; i < 96; ++i) {
    const double grow = (e[i + 1] - e[i]) - (e[i] - e[i - 1]);
    worst = std::max(worst, std::abs(grow - delta));
  }
  ok = ok && worst < 1e-12;
  for (auto m : {DiscMethod::UD, DiscMethod::SID, DiscMethod::LID}) {
    DepthBinSpec s2{1.0, 80.0, 96, m};
    auto edges = boundaries(s2);
    for (int i = 0; i < 96; ++i) {
      ok = ok && depth_to_bin(s2, edges[i]) == i;
      ok = ok && depth_to_bin(s2, std::nextafter(edges[i + 1], 0.0)) == i;
    }
    ok = ok && depth_to_bin(s2, 80.0) == kInvalidBin && depth_to_bin(s2, 0.99) == kInvalidBin;
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "endpoints exact, width growth off by %.2e, inversion total",
                worst);
  criterion("discretization", ok, buf);
}

// ---------------------------------------------------------------------------
// criterion 5: encode/decode round trip on 1e4 pairs
// ---------------------------------------------------------------------------
void check_transform_roundtrip() {
  Rng rng(99);
  double worst = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    Rng r = rng.fork(trial);
    GtBox g;
    double cx = r.uniform(5, 120), cy = r.uniform(5, 120);
    double w = r.uniform(2, 60), h = r.uniform(2, 50);
    g.box2d = {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
    g.xp = cx + r.uniform(-4, 4);
    g.yp = cy + r.uniform(-4, 4);
    g.z = r.uniform(1, 70);
    g.w3d = r.uniform(0.3, 4);
    g.h3d = r.uniform(0.3, 4);
    g.l3d = r.uniform(0.3, 8);
    g.theta = r.uniform(-kPi, kPi);
    Anchor2D3D a;
    a.x2d = a.xp = r.uniform(5, 120);
    a.y2d = a.yp = r.uniform(5, 120);
    a.w2d = r.uniform(3, 50);
    a.h2d = r.uniform(3, 50);
    a.z = r.uniform(2, 60);
    a.w3d = r.uniform(0.5, 3);
    a.h3d = r.uniform(0.5, 3);
    a.l3d = r.uniform(0.5, 6);
    a.theta = r.uniform(-kPi, kPi);
    DecodedBox d = decode(encode_targets(g, a), a);
    auto c = d.corners2d();
    for (int k = 0; k < 4; ++k) worst = std::max(worst, std::abs(c[k] - g.box2d[k]));
    worst = std::max({worst, std::abs(d.xp - g.xp), std::abs(d.yp - g.yp),
                      std::abs(d.z - g.z), std::abs(d.w3d - g.w3d), std::abs(d.h3d - g.h3d),
                      std::abs(d.l3d - g.l3d), std::abs(d.theta - g.theta)});
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "10000 pairs, worst |round trip error| %.2e", worst);
  criterion("transform-roundtrip", worst < 1e-10, buf);
}

// ---------------------------------------------------------------------------
// criterion 6: matcher/IoU oracles over 200 random scenes
// ---------------------------------------------------------------------------
bool inside_rect(const BevRect& r, double x, double z) {
  const double c = std::cos(r.yaw), s = std::sin(r.yaw);
  const double dx = x - r.cx, dz = z - r.cz;
  return std::abs(dx * c - dz * s) <= r.l / 2 && std::abs(dx * s + dz * c) <= r.w / 2;
}

void check_matching_oracles() {
  Rng rng(606);
  bool nms_ok = true, assign_ok = true;
  double ap_worst = 0, iou2d_worst = 0, bev_worst = 0, vox_worst = 0;

  AnchorPriors priors;
  priors.mean.assign(6, {15.0, 1.6, 1.5, 3.8, 0.1});
  priors.variance.assign(6, {});
  priors.counts.assign(6, 1);
  AnchorGrid grid = generate_anchors(6, 6, 12, {0.5, 1.0, 1.5}, {12, 20}, priors);

  for (int scene = 0; scene < 200; ++scene) {
    Rng r = rng.fork(scene);

    // --- NMS vs brute force ---
    std::vector<Detection3D> dets;
    for (int i = 0; i < 40; ++i) {
      Detection3D d;
      double cx = r.uniform(0, 60), cy = r.uniform(0, 60);
      double w = r.uniform(3, 20), h = r.uniform(3, 20);
      d.box2d = {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
      d.score = r.uniform(0, 1);
      dets.push_back(d);
    }
    auto got = nms(dets, 0.4, 0.3);
    std::vector<int> order;
    for (int i = 0; i < 40; ++i)
      if (dets[i].score >= 0.3) order.push_back(i);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return dets[a].score > dets[b].score; });
    std::vector<int> keep;
    for (int idx : order) {
      bool ok = true;
      for (int kk : keep)
        if (iou_2d(dets[idx].box2d, dets[kk].box2d) > 0.4) ok = false;
      if (ok) keep.push_back(idx);
    }
    nms_ok = nms_ok && got.size() == keep.size();
    for (size_t i = 0; i < keep.size() && nms_ok; ++i)
      nms_ok = got[i].score == dets[keep[i]].score;

    // --- assignment vs exhaustive loop ---
    std::vector<GtBox> gts;
    const int ng = r.uniform_int(1, 5);
    for (int i = 0; i < ng; ++i) {
      GtBox g;
      double cx = r.uniform(5, 70), cy = r.uniform(5, 70);
      double w = r.uniform(5, 30), h = r.uniform(5, 25);
      g.box2d = {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
      g.z = r.uniform(5, 30);
      g.w3d = 1.6;
      g.h3d = 1.5;
      g.l3d = 3.9;
      gts.push_back(g);
    }
    auto assign = assign_targets(grid, gts);
    for (size_t i = 0; i < grid.anchors.size() && assign_ok; ++i) {
      const Anchor2D3D& a = grid.anchors[i];
      std::array<double, 4> ab = {a.x2d - a.w2d / 2, a.y2d - a.h2d / 2, a.x2d + a.w2d / 2,
                                  a.y2d + a.h2d / 2};
      int want = -1;
      double best = 0.5;
      for (int gi = 0; gi < ng; ++gi) {
        const double iou = iou_2d(ab, gts[gi].box2d);
        if (iou > best) {
          best = iou;
          want = gi;
        }
      }
      assign_ok = assign[i] == want;
    }

    // --- AP40 vs staircase oracle (1-d interval IoU keeps it independent) ---
    struct Seg {
      int img;
      double lo, hi;
    };
    std::vector<Seg> gseg, dseg;
    std::vector<EvalEntry> ge, de;
    const int n_int = r.uniform_int(1, 5);
    for (int i = 0; i < n_int; ++i) {
      double lo = r.uniform(0, 40);
      gseg.push_back({r.uniform_int(0, 1), lo, lo + r.uniform(2, 6)});
      ge.push_back({gseg.back().img, 0, i});
    }
    const int n_det = r.uniform_int(0, 8);
    for (int i = 0; i < n_det; ++i) {
      if (i % 2 == 0) {
        double lo = r.uniform(0, 40);
        dseg.push_back({r.uniform_int(0, 1), lo, lo + r.uniform(2, 6)});
      } else {
        const Seg& g = gseg[r.uniform_int(0, n_int - 1)];
        double j = r.uniform(-1.5, 1.5);
        dseg.push_back({g.img, g.lo + j, g.hi + 0.4 * j});
      }
      de.push_back({dseg.back().img, r.uniform(0, 1), i});
    }
    auto iou1d = [&](int d, int g) {
      const double inter = std::min(dseg[d].hi, gseg[g].hi) - std::max(dseg[d].lo, gseg[g].lo);
      if (inter <= 0) return 0.0;
      return inter / ((dseg[d].hi - dseg[d].lo) + (gseg[g].hi - gseg[g].lo) - inter);
    };
    auto res = ap40(de, ge, iou1d, 0.5);
    // oracle: independent greedy + right-max staircase
    std::vector<int> ord(de.size());
    for (size_t i = 0; i < ord.size(); ++i) ord[i] = static_cast<int>(i);
    std::stable_sort(ord.begin(), ord.end(),
                     [&](int a, int b) { return de[a].score > de[b].score; });
    std::vector<bool> used(ge.size(), false);
    std::vector<double> prec, rec;
    int tp = 0, fp = 0;
    for (int di : ord) {
      int best = -1;
      double bi = 0;
      for (int gi = 0; gi < n_int; ++gi) {
        if (used[gi] || ge[gi].image_id != de[di].image_id) continue;
        const double v = iou1d(di, gi);
        if (v > bi) {
          bi = v;
          best = gi;
        }
      }
      if (best >= 0 && bi >= 0.5) {
        used[best] = true;
        ++tp;
      } else {
        ++fp;
      }
      prec.push_back(static_cast<double>(tp) / (tp + fp));
      rec.push_back(static_cast<double>(tp) / n_int);
    }
    for (int i = static_cast<int>(prec.size()) - 2; i >= 0; --i)
      prec[i] = std::max(prec[i], prec[i + 1]);
    double sum = 0;
    for (int k = 1; k <= 40; ++k) {
      const double rr = k / 40.0;
      double p = 0;
      for (size_t i = 0; i < rec.size(); ++i)
        if (rec[i] >= rr) {
          p = prec[i];
          break;
        }
      sum += p;
    }
    ap_worst = std::max(ap_worst, std::abs(*res.ap - sum / 40.0));

    // --- 2D IoU vs exact-coverage rasterization ---
    {
      auto rand_box = [&]() -> std::array<double, 4> {
        double x = r.uniform(0, 5), y = r.uniform(0, 5);
        return {x, y, x + r.uniform(1, 5), y + r.uniform(1, 5)};
      };
      auto a = rand_box(), b = rand_box();
      const double x0 = std::min(a[0], b[0]), x1 = std::max(a[2], b[2]);
      const double y0 = std::min(a[1], b[1]), y1 = std::max(a[3], b[3]);
      const int res2 = 256;
      const double dx = (x1 - x0) / res2, dy = (y1 - y0) / res2;
      auto cov = [](double lo, double hi, double blo, double bhi) {
        return std::max(0.0, std::min(hi, bhi) - std::max(lo, blo));
      };
      double inter = 0, uni = 0;
      for (int iy = 0; iy < res2; ++iy)
        for (int ix = 0; ix < res2; ++ix) {
          const double cx0 = x0 + ix * dx, cy0 = y0 + iy * dy;
          const double ca = cov(cx0, cx0 + dx, a[0], a[2]) * cov(cy0, cy0 + dy, a[1], a[3]);
          const double cb = cov(cx0, cx0 + dx, b[0], b[2]) * cov(cy0, cy0 + dy, b[1], b[3]);
          const double cab = cov(std::max(cx0, a[0]), std::min(cx0 + dx, a[2]), b[0], b[2]) *
                             cov(std::max(cy0, a[1]), std::min(cy0 + dy, a[3]), b[1], b[3]);
          inter += cab;
          uni += ca + cb - cab;
        }
      const double oracle = uni > 0 ? inter / uni : 0.0;
      iou2d_worst = std::max(iou2d_worst, std::abs(iou_2d(a, b) - oracle));
    }

    // --- BEV IoU vs 512^2 rasterization ---
    {
      BevRect a{r.uniform(-2, 2), r.uniform(-2, 2), r.uniform(1.4, 1.8), r.uniform(3.4, 4.4),
                r.uniform(-kPi, kPi)};
      BevRect b{a.cx + r.uniform(-2, 2), a.cz + r.uniform(-2, 2), r.uniform(1.4, 1.8),
                r.uniform(3.4, 4.4), r.uniform(-kPi, kPi)};
      double x0 = 1e300, x1 = -1e300, z0 = 1e300, z1 = -1e300;
      for (const BevRect* q : {&a, &b})
        for (const auto& p : bev_corners(*q)) {
          x0 = std::min(x0, p[0]);
          x1 = std::max(x1, p[0]);
          z0 = std::min(z0, p[1]);
          z1 = std::max(z1, p[1]);
        }
      const int res3 = 512;
      const double dx = (x1 - x0) / res3, dz = (z1 - z0) / res3;
      long inter = 0, uni = 0;
      for (int iz = 0; iz < res3; ++iz)
        for (int ix = 0; ix < res3; ++ix) {
          const double px = x0 + (ix + 0.5) * dx, pz = z0 + (iz + 0.5) * dz;
          const bool ia = inside_rect(a, px, pz), ib = inside_rect(b, px, pz);
          inter += ia && ib;
          uni += ia || ib;
        }
      const double oracle = uni ? static_cast<double>(inter) / uni : 0.0;
      bev_worst = std::max(bev_worst, std::abs(iou_bev(a, b) - oracle));
    }

    // --- 3D IoU vs 128^3 voxelization (every other scene; costlier) ---
    if (scene % 2 == 0) {
      EvalBox3D a{r.uniform(-2, 2), r.uniform(-0.5, 0.5), r.uniform(-2, 2),
                  r.uniform(1.4, 1.8), r.uniform(1.3, 1.7), r.uniform(3.4, 4.4),
                  r.uniform(-kPi, kPi)};
      EvalBox3D b{a.cx + r.uniform(-1.5, 1.5), a.cy + r.uniform(-0.8, 0.8),
                  a.cz + r.uniform(-1.5, 1.5), r.uniform(1.4, 1.8), r.uniform(1.3, 1.7),
                  r.uniform(3.4, 4.4), r.uniform(-kPi, kPi)};
      double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300, z0 = 1e300, z1 = -1e300;
      for (const EvalBox3D* q : {&a, &b}) {
        for (const auto& p : bev_corners(q->bev())) {
          x0 = std::min(x0, p[0]);
          x1 = std::max(x1, p[0]);
          z0 = std::min(z0, p[1]);
          z1 = std::max(z1, p[1]);
        }
        y0 = std::min(y0, q->cy - q->h / 2);
        y1 = std::max(y1, q->cy + q->h / 2);
      }
      const int res4 = 128;
      const double dx = (x1 - x0) / res4, dy = (y1 - y0) / res4, dz = (z1 - z0) / res4;
      long inter = 0, uni = 0;
      for (int iy = 0; iy < res4; ++iy) {
        const double py = y0 + (iy + 0.5) * dy;
        for (int iz = 0; iz < res4; ++iz) {
          const double pz = z0 + (iz + 0.5) * dz;
          for (int ix = 0; ix < res4; ++ix) {
            const double px = x0 + (ix + 0.5) * dx;
            const bool ia =
                std::abs(py - a.cy) <= a.h / 2 && inside_rect(a.bev(), px, pz);
            const bool ib =
                std::abs(py - b.cy) <= b.h / 2 && inside_rect(b.bev(), px, pz);
            inter += ia && ib;
            uni += ia || ib;
          }
        }
      }
      const double oracle = uni ? static_cast<double>(inter) / uni : 0.0;
      vox_worst = std::max(vox_worst, std::abs(iou_3d(a, b) - oracle));
    }
  }

  criterion("nms-oracle", nms_ok, "200 scenes, exact agreement with brute-force greedy");
  criterion("assignment-oracle", assign_ok, "200 scenes, exact agreement with exhaustive loop");
  char buf[96];
  std::snprintf(buf, sizeof buf, "200 scenes, worst staircase diff %.2e", ap_worst);
  criterion("ap40-oracle", ap_worst < 1e-12, buf);
  std::snprintf(buf, sizeof buf, "worst diffs: 2D %.2e (tol 5e-3), BEV %.2e (tol 5e-3)",
                iou2d_worst, bev_worst);
  criterion("iou-raster-oracles", iou2d_worst < 5e-3 && bev_worst < 5e-3, buf);
  std::snprintf(buf, sizeof buf, "100 pairs, worst voxel diff %.2e (tol 1e-2)", vox_worst);
  criterion("iou-voxel-oracle", vox_worst < 1e-2, buf);
}

// ---------------------------------------------------------------------------
// criterion 7: toy overfit
// ---------------------------------------------------------------------------
void check_toy_overfit() {
  auto t0 = Clock::now();
  RunConfig cfg;
  cfg.set("steps", "500");
  cfg.set("lr", "0.001");  // toy overfit profile; reference lr 1e-4 stays the default
  cfg.set("scenes", "2");
  TrainResult res = train_toy(cfg, true, true, "");
  const double secs = elapsed_s(t0);
  const double reduction =
      res.loss_at_step10 > 0 ? 1.0 - res.final_loss / res.loss_at_step10 : 0.0;
  const bool ap_one = res.ap3d.has_value() && *res.ap3d == 1.0;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "2 scenes, 500 steps: reduction %.1f%% (want >=90%%), AP40(3D,0.5) %.3f "
                "(want 1.0), %.0fs (budget 300s)",
                100 * reduction, res.ap3d.value_or(-1.0), secs);
  criterion("toy-overfit", reduction >= 0.9 && ap_one && secs < 300.0, buf);
}

// ---------------------------------------------------------------------------
// criterion 8: parser robustness
// ---------------------------------------------------------------------------
void check_parser_robustness() {
  Rng rng(4242);
  std::vector<KittiLabel> ls;
  for (int i = 0; i < 4; ++i) {
    KittiLabel l;
    l.type = i % 2 ? "Car" : "Pedestrian";
    l.truncated = rng.uniform(0, 1);
    l.occluded = rng.uniform_int(0, 3);
    l.alpha = rng.uniform(-3, 3);
    double cx = rng.uniform(100, 900), cy = rng.uniform(80, 300);
    l.bbox = {cx - 30, cy - 20, cx + 30, cy + 20};
    l.dims = {1.5, 1.6, 3.9};
    l.location = {rng.uniform(-8, 8), rng.uniform(0.5, 2), rng.uniform(8, 40)};
    l.rotation_y = rng.uniform(-3, 3);
    ls.push_back(l);
  }
  const std::string canon_labels = serialize_labels(ls, FloatFormat::Compat2);
  const std::string canon17 = serialize_labels(ls, FloatFormat::Full17);
  const std::string canon_calib = "P2: 721.5377 0 609.5593 44.857 0 721.5377 172.854 0.216 0 0 1 0.00274\n";

  // byte-exact canonical round trips
  bool roundtrip = serialize_labels(parse_labels(canon17), FloatFormat::Full17) == canon17;
  roundtrip = roundtrip && serialize_calib(parse_calib(serialize_calib(
                               parse_calib(canon_calib)))) ==
                               serialize_calib(parse_calib(canon_calib));

  const std::string charset = "0123456789.eE+- \tCarDontx\nP:";
  int structured = 0, crashed = 0;
  const int total = 100000;
  for (int trial = 0; trial < total; ++trial) {
    const bool do_calib = trial % 2 == 0;
    std::string s = do_calib ? canon_calib : canon_labels;
    Rng r = rng.fork(trial);
    const int edits = r.uniform_int(1, 8);
    for (int e = 0; e < edits && !s.empty(); ++e) {
      const int pos = r.uniform_int(0, static_cast<int>(s.size()) - 1);
      switch (r.uniform_int(0, 2)) {
        case 0: s[pos] = charset[r.uniform_int(0, static_cast<int>(charset.size()) - 1)]; break;
        case 1: s.erase(pos, 1); break;
        default: s.insert(pos, 1, charset[r.uniform_int(0, static_cast<int>(charset.size()) - 1)]);
      }
    }
    try {
      if (do_calib)
        (void)parse_calib(s);
      else
        (void)parse_labels(s);
    } catch (const InputError&) {
      ++structured;
    } catch (...) {
      ++crashed;
    }
  }
  char buf[128];
  std::snprintf(buf, sizeof buf,
                "%d fuzzed inputs: %d parsed, %d structured errors, %d other; round trip %s",
                total, total - structured - crashed, structured, crashed,
                roundtrip ? "byte-exact" : "BROKEN");
  criterion("parser-robustness", crashed == 0 && roundtrip, buf);
}

// ---------------------------------------------------------------------------
// criterion 9: ablation echo
// ---------------------------------------------------------------------------
void check_ablation_echo() {
  int wins = 0;
  std::string detail;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    RunConfig cfg;
    cfg.set("steps", "200");
    cfg.set("lr", "0.001");
    cfg.set("seed", std::to_string(seed));
    TrainResult full = train_toy(cfg, true, true, "");
    TrainResult base = train_toy(cfg, false, false, "");
    const bool win = full.final_det_loss < base.final_det_loss;
    wins += win;
    detail += win ? "W" : "L";
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "full model beat the stripped baseline in %d/5 seeds [%s]",
                wins, detail.c_str());
  criterion("ablation-echo", wins >= 4, buf);
}

}  // namespace

int main() {
  std::printf("acceptance suite\n----------------\n");
  check_gradient_suite();
  check_equation_oracles();
  check_linear_attention();
  check_discretization();
  check_transform_roundtrip();
  check_matching_oracles();
  check_parser_robustness();
  check_toy_overfit();
  check_ablation_echo();
  std::printf("----------------\n%s (%d failure%s)\n", g_failures ? "FAIL" : "PASS", g_failures,
              g_failures == 1 ? "" : "s");
  return g_failures ? 1 : 0;
}
