#include "mono3d/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <sstream>

#include "mono3d/depthbin.hpp"
#include "mono3d/detect.hpp"
#include "mono3d/dfe.hpp"
#include "mono3d/dtr.hpp"
#include "mono3d/eval.hpp"
#include "mono3d/kittiio.hpp"
#include "mono3d/trainer.hpp"

namespace fs = std::filesystem;

namespace mono3d {

namespace {

Tensor weighted(const Tensor& y, Rng& rng) {
  Tensor w = Tensor::uniform(y.shape(), rng, -1.0, 1.0);
  return sum_all(mul(y, w));
}

using CheckFn = std::function<GradCheckResult(int seed, double eps, double tol)>;

struct NamedCheck {
  const char* name;
  CheckFn fn;
};

std::vector<NamedCheck> build_suite() {
  std::vector<NamedCheck> suite;
  auto unary = [&](const char* name, auto op, double lo, double hi) {
    suite.push_back({name, [name, op, lo, hi](int seed, double eps, double tol) {
                       Rng r(0x9000 + seed);
                       Tensor x0 = Tensor::uniform({3, 4}, r, lo, hi);
                       Rng rw = r.fork(1);
                       return gradcheck(name, [&](const Tensor& t) {
                         Rng rc = rw;
                         return weighted(op(t), rc);
                       }, x0, eps, tol);
                     }});
  };
  unary("add_scalar", [](const Tensor& t) { return add(t, 0.7); }, -2, 2);
  unary("scale", [](const Tensor& t) { return scale(t, -1.3); }, -2, 2);
  unary("elu", [](const Tensor& t) { return elu(t); }, -2, 2);
  unary("exp", [](const Tensor& t) { return exp(t); }, -1.5, 1.5);
  unary("log", [](const Tensor& t) { return log(t); }, 0.2, 3);
  unary("relu", [](const Tensor& t) { return relu(add(t, 3.0)); }, -2, 2);
  unary("sigmoid", [](const Tensor& t) { return sigmoid(t); }, -3, 3);
  unary("softplus", [](const Tensor& t) { return softplus(t); }, -3, 3);
  unary("smooth_l1", [](const Tensor& t) { return smooth_l1(t); }, 0.05, 0.9);
  unary("pow_scalar", [](const Tensor& t) { return pow_scalar(t, 2.0); }, 0.1, 2);
  unary("softmax", [](const Tensor& t) { return softmax(t, 1); }, -2, 2);
  unary("normalize_sum", [](const Tensor& t) { return normalize_sum(t, 0); }, 0.2, 2);
  unary("transpose", [](const Tensor& t) { return transpose(t); }, -2, 2);
  unary("reshape", [](const Tensor& t) { return reshape(t, {2, 6}); }, -2, 2);
  unary("mean_all", [](const Tensor& t) { return mean_all(t); }, -2, 2);
  unary("slice", [](const Tensor& t) { return slice(t, 1, 1, 2); }, -2, 2);

  auto binary = [&](const char* name, auto op, double lo, double hi) {
    suite.push_back({name, [name, op, lo, hi](int seed, double eps, double tol) {
                       Rng r(0xB000 + seed);
                       Tensor other = Tensor::uniform({3, 4}, r, lo, hi);
                       Tensor x0 = Tensor::uniform({3, 4}, r, lo, hi);
                       Rng rw = r.fork(1);
                       return gradcheck(name, [&](const Tensor& t) {
                         Rng rc = rw;
                         return weighted(op(t, other), rc);
                       }, x0, eps, tol);
                     }});
  };
  binary("add", [](const Tensor& a, const Tensor& b) { return add(a, b); }, -2, 2);
  binary("sub", [](const Tensor& a, const Tensor& b) { return sub(a, b); }, -2, 2);
  binary("mul", [](const Tensor& a, const Tensor& b) { return mul(a, b); }, -2, 2);
  binary("div", [](const Tensor& a, const Tensor& b) { return divide(a, b); }, 0.4, 2);

  suite.push_back({"matmul", [](int seed, double eps, double tol) {
                     Rng r(0xC000 + seed);
                     Tensor b = Tensor::uniform({4, 3}, r, -1, 1);
                     Tensor x0 = Tensor::uniform({3, 4}, r, -1, 1);
                     Rng rw = r.fork(1);
                     return gradcheck("matmul", [&](const Tensor& t) {
                       Rng rc = rw;
                       return weighted(matmul(t, b), rc);
                     }, x0, eps, tol);
                   }});
  suite.push_back({"permute3", [](int seed, double eps, double tol) {
                     Rng r(0xC100 + seed);
                     Tensor x0 = Tensor::uniform({2, 3, 4}, r, -1, 1);
                     Rng rw = r.fork(1);
                     return gradcheck("permute3", [&](const Tensor& t) {
                       Rng rc = rw;
                       return weighted(permute3(t, 2, 0, 1), rc);
                     }, x0, eps, tol);
                   }});
  suite.push_back({"concat", [](int seed, double eps, double tol) {
                     Rng r(0xC200 + seed);
                     Tensor other = Tensor::uniform({2, 4}, r, -1, 1);
                     Tensor x0 = Tensor::uniform({3, 4}, r, -1, 1);
                     Rng rw = r.fork(1);
                     return gradcheck("concat", [&](const Tensor& t) {
                       Rng rc = rw;
                       return weighted(concat({t, other}, 0), rc);
                     }, x0, eps, tol);
                   }});
  suite.push_back({"rowwise_scale", [](int seed, double eps, double tol) {
                     Rng r(0xC300 + seed);
                     Tensor s = Tensor::uniform({3}, r, 0.5, 1.5);
                     Tensor x0 = Tensor::uniform({3, 4}, r, -1, 1);
                     Rng rw = r.fork(1);
                     return gradcheck("rowwise_scale", [&](const Tensor& t) {
                       Rng rc = rw;
                       return weighted(rowwise_scale(t, s), rc);
                     }, x0, eps, tol);
                   }});
  suite.push_back({"layer_norm", [](int seed, double eps, double tol) {
                     Rng r(0xC400 + seed);
                     Tensor g = Tensor::uniform({4}, r, 0.5, 1.5);
                     Tensor b = Tensor::uniform({4}, r, -0.5, 0.5);
                     Tensor x0 = Tensor::uniform({3, 4}, r, -1, 1);
                     Rng rw = r.fork(1);
                     return gradcheck("layer_norm", [&](const Tensor& t) {
                       Rng rc = rw;
                       return weighted(layer_norm(t, g, b), rc);
                     }, x0, eps, tol);
                   }});
  suite.push_back({"gather_rows", [](int seed, double eps, double tol) {
                     Rng r(0xC500 + seed);
                     std::vector<int> idx = {2, 0, 2, 1};
                     Tensor x0 = Tensor::uniform({3, 4}, r, -1, 1);
                     Rng rw = r.fork(1);
                     return gradcheck("gather_rows", [&](const Tensor& t) {
                       Rng rc = rw;
                       return weighted(gather_rows(t, idx), rc);
                     }, x0, eps, tol);
                   }});
  suite.push_back({"gather_bin_probs", [](int seed, double eps, double tol) {
                     Rng r(0xC600 + seed);
                     std::vector<int> bins = {0, -1, 2, 1};
                     Tensor x0 = Tensor::uniform({3, 2, 2}, r, 0.1, 1.0);
                     Rng rw = r.fork(1);
                     return gradcheck("gather_bin_probs", [&](const Tensor& t) {
                       Rng rc = rw;
                       return weighted(gather_bin_probs(t, bins), rc);
                     }, x0, eps, tol);
                   }});
  suite.push_back({"conv2d", [](int seed, double eps, double tol) {
                     Rng r(0xC700 + seed);
                     Conv2dParams p = Conv2dParams::create(2, 3, 3, 3, r, 1, 1, 1, true);
                     Tensor x0 = Tensor::uniform({2, 4, 4}, r, -1, 1);
                     Rng rw = r.fork(1);
                     return gradcheck("conv2d", [&](const Tensor& t) {
                       Rng rc = rw;
                       return weighted(conv2d(t, p), rc);
                     }, x0, eps, tol);
                   }});
  suite.push_back({"conv2d_grouped", [](int seed, double eps, double tol) {
                     Rng r(0xC800 + seed);
                     Conv2dParams p = Conv2dParams::create(4, 4, 3, 3, r, 2, 1, 1, false);
                     Tensor x0 = Tensor::uniform({4, 4, 4}, r, -1, 1);
                     Rng rw = r.fork(1);
                     return gradcheck("conv2d_grouped", [&](const Tensor& t) {
                       Rng rc = rw;
                       return weighted(conv2d(t, p), rc);
                     }, x0, eps, tol);
                   }});

  // composite: the full depth-enhancement module
  suite.push_back({"dfe_module", [](int seed, double eps, double tol) {
                     Rng r(0xD000 + seed);
                     DfeState s = DfeState::create(3, 4, 2, r);
                     Tensor x0 = Tensor::uniform({3, 3, 3}, r, -1, 1);
                     Rng rw = r.fork(1);
                     return gradcheck("dfe_module", [&](const Tensor& t) {
                       Rng rc = rw;
                       return weighted(dfe_forward(t, s), rc);
                     }, x0, eps, tol);
                   }});
  // composite: one encoder + one decoder transformer layer, both kernels
  for (auto kind : {AttentionKind::Vanilla, AttentionKind::Linear}) {
    const char* name =
        kind == AttentionKind::Vanilla ? "dtr_layer_vanilla" : "dtr_layer_linear";
    suite.push_back({name, [name, kind](int seed, double eps, double tol) {
                       Rng r(0xD100 + seed + (kind == AttentionKind::Linear ? 7777 : 0));
                       AttentionConfig cfg;
                       cfg.model_dim = 4;
                       cfg.heads = 2;
                       cfg.kind = kind;
                       DtrState s = DtrState::create(cfg, r);
                       Tensor dpe = Tensor::uniform({4, 2, 2}, r, -0.5, 0.5);
                       Tensor dfeat = Tensor::uniform({4, 2, 2}, r, -1, 1);
                       Tensor x0 = Tensor::uniform({4, 2, 2}, r, -1, 1);
                       Rng rw = r.fork(1);
                       return gradcheck(name, [&](const Tensor& t) {
                         Rng rc = rw;
                         Tensor enc = encoder_forward(t, dpe, s);
                         return weighted(decoder_forward(dfeat, enc, dpe, s), rc);
                       }, x0, eps, tol);
                     }});
  }
  // composite: encoder layer with the layer-normalization toggle on
  suite.push_back({"dtr_layer_norm", [](int seed, double eps, double tol) {
                     Rng r(0xD150 + seed);
                     AttentionConfig cfg;
                     cfg.model_dim = 4;
                     cfg.heads = 2;
                     cfg.kind = AttentionKind::Linear;
                     cfg.layer_norm = true;
                     DtrState s = DtrState::create(cfg, r);
                     Tensor dpe = Tensor::uniform({4, 2, 2}, r, -0.5, 0.5);
                     Tensor x0 = Tensor::uniform({4, 2, 2}, r, -1, 1);
                     Rng rw = r.fork(1);
                     return gradcheck("dtr_layer_norm", [&](const Tensor& t) {
                       Rng rc = rw;
                       return weighted(encoder_forward(t, dpe, s), rc);
                     }, x0, eps, tol);
                   }});
  // composite: detection loss on a 2-anchor toy
  suite.push_back({"detection_loss", [](int seed, double eps, double tol) {
                     Rng r(0xD200 + seed);
                     AnchorPriors priors;
                     priors.mean.assign(1, {15.0, 1.6, 1.5, 3.8, 0.1});
                     priors.variance.assign(1, {});
                     priors.counts.assign(1, 1);
                     AnchorGrid grid = generate_anchors(1, 2, 16, {1.0}, {20.0}, priors);
                     GtBox g;
                     const Anchor2D3D& a0 = grid.anchors[0];
                     g.box2d = {a0.x2d - 11, a0.y2d - 9, a0.x2d + 11, a0.y2d + 9};
                     g.xp = a0.x2d + 1;
                     g.yp = a0.y2d - 1;
                     g.z = 14;
                     g.w3d = 1.5;
                     g.h3d = 1.4;
                     g.l3d = 4.0;
                     g.theta = 0.3;
                     std::vector<GtBox> gts = {g};
                     std::vector<int> assign = {0, -1};
                     Tensor x0 = Tensor::uniform({2, kNumRegression + 1}, r, -1.5, 1.5);
                     return gradcheck("detection_loss", [&](const Tensor& t) {
                       return detection_loss(t, assign, gts, grid, 1).total;
                     }, x0, eps, tol);
                   }});
  // composite: auxiliary depth loss through the softmax head
  suite.push_back({"depth_focal", [](int seed, double eps, double tol) {
                     Rng r(0xD300 + seed);
                     DepthTargetMap tm;
                     tm.height = tm.width = 2;
                     tm.bins = {1, kInvalidBin, 3, 0};
                     tm.depths.assign(4, 0.0);
                     Tensor x0 = Tensor::uniform({4, 2, 2}, r, -1, 1);
                     return gradcheck("depth_focal", [&](const Tensor& t) {
                       return depth_focal_loss(softmax(t, 0), tm).loss;
                     }, x0, eps, tol);
                   }});
  return suite;
}

}  // namespace

std::vector<GradCheckResult> run_gradient_suite(int seeds, double eps, double tol,
                                                const std::string& corrupt_op) {
  auto suite = build_suite();
  std::vector<GradCheckResult> results;
  for (const NamedCheck& check : suite) {
    GradCheckResult worst{check.name, 0.0, true};
    for (int s = 0; s < seeds; ++s) {
      if (!corrupt_op.empty() && corrupt_op == check.name)
        set_gradient_corruption(corrupt_op);
      GradCheckResult r = check.fn(s, eps, tol);
      set_gradient_corruption("");
      worst.max_rel_err = std::max(worst.max_rel_err, r.max_rel_err);
      worst.pass = worst.pass && r.pass;
    }
    results.push_back(worst);
  }
  return results;
}

int cmd_gradcheck(const RunConfig& cfg, std::ostream& out) {
  const int seeds = cfg.get_int("gradcheck_seeds");
  const double eps = cfg.get_double("gradcheck_eps");
  const double tol = cfg.get_double("gradcheck_tol");
  auto results = run_gradient_suite(seeds, eps, tol, cfg.get("gradcheck_corrupt"));
  bool all = true;
  for (const auto& r : results) {
    char line[128];
    std::snprintf(line, sizeof line, "%-20s max_rel_err %.3e  %s\n", r.name.c_str(),
                  r.max_rel_err, r.pass ? "PASS" : "FAIL");
    out << line;
    all = all && r.pass;
  }
  out << (all ? "gradcheck: all passed\n" : "gradcheck: FAILURES present\n");
  return all ? 0 : 1;
}

int cmd_bench(const RunConfig& cfg, std::ostream& out, bool parallel) {
  if (parallel) throw InputError("bench is single-threaded by contract; --parallel refused");
  AttentionConfig ac;
  ac.model_dim = cfg.get_int("bench_dim");
  ac.heads = 1;
  std::vector<int> sizes;
  for (double v : cfg.get_list("bench_sizes")) sizes.push_back(static_cast<int>(v));
  auto rows = bench_attention(ac, sizes, cfg.get_int("bench_runs"), cfg.get_u64("seed"));
  std::string csv = bench_csv(rows);
  out << csv;
  fs::create_directories(cfg.get("out_dir"));
  const fs::path path = fs::path(cfg.get("out_dir")) / "bench.csv";
  std::ofstream f(path);
  if (!f) throw InputError("cannot write " + path.string());
  f << csv;
  return 0;
}

int cmd_train_toy(const RunConfig& cfg, std::ostream& out) {
  const fs::path dir = cfg.get("out_dir");
  fs::create_directories(dir);
  TrainResult res;
  try {
    res = train_toy(cfg, true, true, (dir / "checkpoint.mckp").string(), dir.string());
  } catch (const CheckError& e) {
    out << "train-toy aborted: " << e.what() << "\n";
    return 1;
  }
  {
    std::ofstream f(dir / "loss_curve.csv");
    if (!f) throw InputError("cannot write loss curve");
    f << res.curve_csv;
  }
  const double reduction =
      res.loss_at_step10 > 0 ? 1.0 - res.final_loss / res.loss_at_step10 : 0.0;
  char line[256];
  std::snprintf(line, sizeof line,
                "steps %d  loss(step10) %.6f  final %.6f  reduction %.1f%%\n", res.num_steps,
                res.loss_at_step10, res.final_loss, 100.0 * reduction);
  out << line;
  out << res.report.to_text();
  out << "wrote " << (dir / "loss_curve.csv").string() << " and "
      << (dir / "checkpoint.mckp").string() << "\n";
  return 0;
}

namespace {

// Label -> evaluation boxes; the stored location is the bottom-center.
EvalBox3D label_to_eval(const KittiLabel& l) {
  return {l.location[0], l.location[1] - l.dims[0] / 2, l.location[2],
          l.dims[1], l.dims[0], l.dims[2], l.rotation_y};
}

}  // namespace

int cmd_eval(const std::string& det_dir, const std::string& gt_dir, const RunConfig& cfg,
             std::ostream& out, bool parallel) {
  if (!fs::is_directory(gt_dir)) throw InputError("not a directory: " + gt_dir);
  if (!fs::is_directory(det_dir)) throw InputError("not a directory: " + det_dir);

  std::vector<fs::path> gt_files;
  for (const auto& e : fs::directory_iterator(gt_dir))
    if (e.path().extension() == ".txt") gt_files.push_back(e.path());
  std::sort(gt_files.begin(), gt_files.end());
  if (gt_files.empty()) throw InputError("no .txt label files in " + gt_dir);

  struct Entry {
    int image;
    KittiLabel label;
  };
  std::vector<Entry> all_dets, all_gts;
  auto read_file = [](const fs::path& p) {
    std::ifstream f(p);
    if (!f) throw InputError("cannot open " + p.string());
    std::ostringstream os;
    os << f.rdbuf();
    return parse_labels(os.str());
  };
  // parsing is pure, so images may be handled concurrently when asked
  std::vector<std::vector<KittiLabel>> gt_parsed(gt_files.size()), det_parsed(gt_files.size());
  auto parse_one = [&](size_t i) {
    gt_parsed[i] = read_file(gt_files[i]);
    const fs::path det_path = fs::path(det_dir) / gt_files[i].filename();
    if (fs::exists(det_path)) det_parsed[i] = read_file(det_path);
  };
  if (parallel) {
    std::vector<std::future<void>> jobs;
    for (size_t i = 0; i < gt_files.size(); ++i)
      jobs.push_back(std::async(std::launch::async, parse_one, i));
    for (auto& j : jobs) j.get();
  } else {
    for (size_t i = 0; i < gt_files.size(); ++i) parse_one(i);
  }
  for (size_t i = 0; i < gt_files.size(); ++i) {
    for (auto& l : gt_parsed[i])
      if (!l.is_dont_care()) all_gts.push_back({static_cast<int>(i), std::move(l)});
    for (auto& l : det_parsed[i])
      if (!l.is_dont_care()) all_dets.push_back({static_cast<int>(i), std::move(l)});
  }

  EvalReport report;
  for (const std::string& cls : cfg.get_names("classes")) {
    std::vector<EvalEntry> dets, gts;
    std::vector<const KittiLabel*> det_rows, gt_rows;
    for (const Entry& e : all_dets)
      if (e.label.type == cls) {
        dets.push_back({e.image, e.label.score.value_or(1.0),
                        static_cast<int>(det_rows.size())});
        det_rows.push_back(&e.label);
      }
    for (const Entry& e : all_gts)
      if (e.label.type == cls) {
        gts.push_back({e.image, 0, static_cast<int>(gt_rows.size())});
        gt_rows.push_back(&e.label);
      }
    auto iou2d_fn = [&](int d, int g) { return iou_2d(det_rows[d]->bbox, gt_rows[g]->bbox); };
    auto bev_fn = [&](int d, int g) {
      return iou_bev(label_to_eval(*det_rows[d]).bev(), label_to_eval(*gt_rows[g]).bev());
    };
    auto iou3d_fn = [&](int d, int g) {
      return iou_3d(label_to_eval(*det_rows[d]), label_to_eval(*gt_rows[g]));
    };
    for (double thr : cfg.get_list("eval_ious")) {
      report.cells.push_back({cls, "AP2D", thr, ap40(dets, gts, iou2d_fn, thr)});
      report.cells.push_back({cls, "APBEV", thr, ap40(dets, gts, bev_fn, thr)});
      report.cells.push_back({cls, "AP3D", thr, ap40(dets, gts, iou3d_fn, thr)});
    }
  }

  out << report.to_text();
  const fs::path dir = cfg.get("out_dir");
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "eval_report.json");
    if (!f) throw InputError("cannot write eval report");
    f << report.to_json();
  }
  {
    std::ofstream f(dir / "eval_report.txt");
    f << report.to_text();
  }
  return 0;
}

int cmd_inspect(const std::string& path, std::ostream& out) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  const std::string content = buf.str();

  if (content.size() >= 4 && content.compare(0, 4, "TNSR") == 0) {
    Tensor t = load_tensor(path);
    out << "tensor " << shape_str(t.shape()) << ", " << t.numel() << " elements\n";
    double lo = 1e300, hi = -1e300, sum = 0;
    for (double v : t.data()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      sum += v;
    }
    char line[128];
    std::snprintf(line, sizeof line, "min %.6g  max %.6g  mean %.6g\n", lo, hi,
                  sum / static_cast<double>(t.numel()));
    out << line;
    return 0;
  }
  if (content.size() >= 4 && content.compare(0, 4, "MCKP") == 0) {
    auto params = load_checkpoint(path);
    int64_t total = 0;
    for (const Tensor& p : params) total += p.numel();
    out << "checkpoint with " << params.size() << " tensors, " << total << " parameters\n";
    return 0;
  }
  if (content.compare(0, 4, "DBIN") == 0) {
    int bins = 0;
    DepthTargetMap m = parse_dbin(content, &bins);
    out << "depth bin map " << m.height << "x" << m.width << ", " << bins << " bins\n";
    std::map<int, int> hist;
    for (int b : m.bins)
      if (b >= 0) ++hist[b];
    out << "valid " << m.valid_count() << ", invalid "
        << (static_cast<int>(m.bins.size()) - m.valid_count()) << "\n";
    for (auto [b, n] : hist) out << "  bin " << b << ": " << n << "\n";
    return 0;
  }
  if (fs::path(path).extension() == ".bin") {
    auto pts = load_points_bin(path);
    out << "point list: " << pts.size() << " points\n";
    if (!pts.empty()) {
      double zmin = 1e300, zmax = -1e300;
      for (const auto& p : pts) {
        zmin = std::min(zmin, p[2]);
        zmax = std::max(zmax, p[2]);
      }
      char line[96];
      std::snprintf(line, sizeof line, "depth (Z) range [%.3f, %.3f]\n", zmin, zmax);
      out << line;
    }
    return 0;
  }
  if (content.find("P2:") != std::string::npos) {
    Calibration c = parse_calib(content);
    char line[160];
    std::snprintf(line, sizeof line, "calibration: fx %.4f fy %.4f cx %.4f cy %.4f\n", c.fx(),
                  c.fy(), c.cx(), c.cy());
    out << line;
    out << serialize_calib(c);
    return 0;
  }
  // fall back to a label table
  auto labels = parse_labels(content);
  out << "labels: " << labels.size() << " objects\n";
  out << "type         trunc occl  alpha   bbox                        dims (h,w,l)    "
         "location (X,Y,Z)      ry     score\n";
  for (const KittiLabel& l : labels) {
    char line[256];
    std::snprintf(line, sizeof line,
                  "%-12s %5.2f %4d %6.2f  [%6.1f %6.1f %6.1f %6.1f]  %4.2f %4.2f %5.2f  "
                  "%7.2f %6.2f %6.2f  %5.2f %s\n",
                  l.type.c_str(), l.truncated, l.occluded, l.alpha, l.bbox[0], l.bbox[1],
                  l.bbox[2], l.bbox[3], l.dims[0], l.dims[1], l.dims[2], l.location[0],
                  l.location[1], l.location[2], l.rotation_y,
                  l.score ? std::to_string(*l.score).c_str() : "-");
    out << line;
    // invariant report
    if (!l.is_dont_care() && (l.dims[0] <= 0 || l.dims[1] <= 0 || l.dims[2] <= 0))
      out << "  ^ warning: non-positive dimensions\n";
  }
  return 0;
}

}  // namespace mono3d
