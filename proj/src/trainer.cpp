#include "mono3d/trainer.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace mono3d {

PipelineConfig PipelineConfig::from_config(const RunConfig& cfg) {
  PipelineConfig p;
  p.channels = cfg.get_int("C");
  p.feat_h = cfg.get_int("H");
  p.feat_w = cfg.get_int("W");
  p.num_bins = cfg.get_int("D");
  p.merge_scale = cfg.get_int("r");
  p.stride = cfg.get_int("stride");
  p.attention.model_dim = p.channels;
  p.attention.heads = cfg.get_int("heads");
  p.attention.kind = attention_kind_from_string(cfg.get("attention"));
  p.attention.ffn_dim = cfg.get_int("ffn_dim");
  p.attention.enc_layers = cfg.get_int("enc_layers");
  p.attention.dec_layers = cfg.get_int("dec_layers");
  p.attention.layer_norm = cfg.get_bool("layer_norm");
  p.ratios = cfg.get_list("ratios");
  p.scales = cfg.scales();
  p.num_classes = static_cast<int>(cfg.get_names("classes").size());
  p.bin_spec = {cfg.get_double("d_min"), cfg.get_double("d_max"), cfg.get_int("D"),
                disc_method_from_string(cfg.get("disc_method"))};
  p.loss.gamma = cfg.get_double("gamma_focal");
  p.loss.alpha = cfg.get_double("alpha_focal");
  p.loss.w_cls = cfg.get_double("w_cls");
  p.loss.w_reg = cfg.get_double("w_reg");
  p.w_dep = cfg.get_double("w_dep");
  return p;
}

Pipeline Pipeline::create(const PipelineConfig& cfg, Rng& rng) {
  Pipeline m;
  m.cfg = cfg;
  Rng rc = rng.fork(10), rd = rng.fork(11), rp = rng.fork(12), rt = rng.fork(13);
  Rng rh1 = rng.fork(14), rh2 = rng.fork(15);
  m.context_conv = Conv2dParams::create(cfg.channels, cfg.channels, 3, 3, rc, 1, 1);
  m.dfe = DfeState::create(cfg.channels, cfg.num_bins, cfg.merge_scale, rd);
  m.dpe = DpeState::create(cfg.num_bins, cfg.channels, rp);
  m.dtr = DtrState::create(cfg.attention, rt);
  m.head_conv1 = Conv2dParams::create(cfg.channels, cfg.channels, 3, 3, rh1, 1, 1);
  const int out_ch = cfg.templates() * (kNumRegression + cfg.num_classes);
  m.head_conv2 = Conv2dParams::create(cfg.channels, out_ch, 1, 1, rh2);
  // classification channels start at a low-probability prior so the focal
  // negatives do not dominate the first steps
  auto bias = m.head_conv2.bias.raw_data();
  const int fdim = kNumRegression + cfg.num_classes;
  for (int t = 0; t < cfg.templates(); ++t)
    for (int k = kNumRegression; k < fdim; ++k) bias[t * fdim + k] = -2.0;
  return m;
}

PipelineOut Pipeline::forward(const Tensor& features) const {
  const int c = cfg.channels, h = cfg.feat_h, w = cfg.feat_w;
  PipelineOut out;
  Tensor context = elu(conv2d(features, context_conv));

  Tensor depth_feat;
  if (cfg.use_dfe) {
    depth_feat = dfe_forward(features, dfe, &out.dist);
    out.has_dist = true;
  } else {
    depth_feat = features;  // ablation pass-through
  }

  Tensor dpe_map = (cfg.use_dpe && out.has_dist) ? build_dpe(out.dist, dpe)
                                                 : Tensor::zeros({c, h, w});
  Tensor encoded = encoder_forward(context, dpe_map, dtr);
  Tensor fused = unflatten_tokens(decoder_forward(depth_feat, encoded, dpe_map, dtr), h, w);

  Tensor hid = elu(conv2d(fused, head_conv1));
  Tensor raw = conv2d(hid, head_conv2);  // [T*(11+K), H, W]
  const int t = cfg.templates(), fdim = kNumRegression + cfg.num_classes, n = h * w;
  out.preds = reshape(permute3(reshape(raw, {t, fdim, n}), 2, 0, 1), {n * t, fdim});
  return out;
}

std::vector<Tensor> Pipeline::params() const {
  std::vector<Tensor> out = {context_conv.weight, context_conv.bias,
                             head_conv1.weight,  head_conv1.bias,
                             head_conv2.weight,  head_conv2.bias};
  if (cfg.use_dfe) {
    auto d = dfe.params();
    out.insert(out.end(), d.begin(), d.end());
  }
  if (cfg.use_dpe && cfg.use_dfe) {
    auto p = dpe.params();
    out.insert(out.end(), p.begin(), p.end());
  }
  auto t = dtr.params();
  out.insert(out.end(), t.begin(), t.end());
  return out;
}

void Adam::step(std::vector<Tensor>& params, double lr) {
  if (m.empty()) {
    for (const Tensor& p : params) {
      m.emplace_back(p.numel(), 0.0);
      v.emplace_back(p.numel(), 0.0);
    }
  }
  ++t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (size_t i = 0; i < params.size(); ++i) {
    auto data = params[i].raw_data();
    auto grad = params[i].grad();
    if (grad.empty()) continue;  // parameter unused by this graph
    for (size_t j = 0; j < data.size(); ++j) {
      m[i][j] = beta1 * m[i][j] + (1 - beta1) * grad[j];
      v[i][j] = beta2 * v[i][j] + (1 - beta2) * grad[j] * grad[j];
      data[j] -= lr * (m[i][j] / bc1) / (std::sqrt(v[i][j] / bc2) + eps);
    }
  }
}

double cosine_lr(double lr0, int step, int total_steps) {
  return lr0 * (1.0 + std::cos(kPi * step / total_steps)) / 2.0;
}

std::vector<Detection3D> run_inference(const Pipeline& model, const Tensor& features,
                                       const AnchorGrid& anchors, const Calibration& calib,
                                       double score_thresh, double nms_iou) {
  NoGradGuard no_grad;
  PipelineOut out = model.forward(features);
  const int k = model.cfg.num_classes;
  std::vector<Detection3D> dets;
  auto pd = out.preds.data();
  const int fdim = kNumRegression + k;
  for (int64_t a = 0; a < anchors.size(); ++a) {
    int best_cls = 0;
    double best_logit = pd[a * fdim + kNumRegression];
    for (int c = 1; c < k; ++c) {
      const double lg = pd[a * fdim + kNumRegression + c];
      if (lg > best_logit) {
        best_logit = lg;
        best_cls = c;
      }
    }
    const double score = 1.0 / (1.0 + std::exp(-best_logit));
    if (score < score_thresh) continue;
    std::array<double, kNumRegression> t;
    for (int i = 0; i < kNumRegression; ++i) t[i] = pd[a * fdim + i];
    DecodedBox d = decode(t, anchors.anchors[a]);
    if (d.z <= 0) continue;
    Detection3D det;
    det.cls = best_cls;
    det.score = score;
    det.box2d = d.corners2d();
    det.center3d = backproject_center(d.xp, d.yp, d.z, calib);
    det.w3d = d.w3d;
    det.h3d = d.h3d;
    det.l3d = d.l3d;
    det.ry = ry_from_alpha(d.theta, det.center3d[0], det.center3d[2]);
    dets.push_back(det);
  }
  return nms(dets, nms_iou, score_thresh);
}

TrainResult train_toy(const RunConfig& cfg, bool use_dfe, bool use_dpe,
                      const std::string& checkpoint_path, const std::string& dump_dir) {
  const uint64_t seed = cfg.get_u64("seed");
  Rng rng(seed);

  PipelineConfig pc = PipelineConfig::from_config(cfg);
  pc.use_dfe = use_dfe;
  pc.use_dpe = use_dpe;

  SceneParams sp = SceneParams::from_config(cfg);
  const int n_scenes = cfg.get_int("scenes");
  std::vector<SyntheticScene> scenes;
  for (int i = 0; i < n_scenes; ++i) scenes.push_back(make_scene(sp, rng.fork(1000 + i)));

  // anchors from the pooled ground truth of all scenes
  std::vector<GtBox> all_gts;
  std::vector<std::vector<GtBox>> scene_gts(scenes.size());
  for (size_t i = 0; i < scenes.size(); ++i) {
    for (const SceneBox& b : scenes[i].boxes) scene_gts[i].push_back(b.to_gt(scenes[i].calib));
    all_gts.insert(all_gts.end(), scene_gts[i].begin(), scene_gts[i].end());
  }
  AnchorPriors priors = compute_anchor_priors(all_gts, pc.ratios, pc.scales);
  AnchorGrid anchors =
      generate_anchors(pc.feat_h, pc.feat_w, pc.stride, pc.ratios, pc.scales, priors);

  std::vector<std::vector<int>> assignments(scenes.size());
  std::vector<DepthTargetMap> depth_targets;
  for (size_t i = 0; i < scenes.size(); ++i) {
    assignments[i] = assign_targets(anchors, scene_gts[i]);
    std::vector<DepthPoint> feat_points;
    for (const DepthPoint& q : scenes[i].depth_points)
      feat_points.push_back({q.u / pc.stride, q.v / pc.stride, q.depth});
    depth_targets.push_back(rasterize_depth_gt(feat_points, pc.feat_h, pc.feat_w, pc.bin_spec));
  }

  Rng model_rng = rng.fork(7);
  Pipeline model = Pipeline::create(pc, model_rng);
  std::vector<Tensor> params = model.params();
  Adam opt;

  const int steps = cfg.get_int("steps");
  const double lr0 = cfg.get_double("lr");
  const double gamma = pc.loss.gamma, alpha = pc.loss.alpha;
  const bool dep_per_image = cfg.get_bool("depth_per_image");

  TrainResult res;
  res.num_steps = steps;
  std::ostringstream csv;
  csv << "step,lr,total,cls,reg,dep\n";
  for (int step = 0; step < steps; ++step) {
    for (Tensor& p : params) p.zero_grad();
    Tensor total = Tensor::scalar(0.0);
    Tensor dep_sum = Tensor::scalar(0.0);  // global-mean mode accumulators
    int dep_pixels = 0;
    double cls_v = 0, reg_v = 0, dep_v = 0;
    for (size_t i = 0; i < scenes.size(); ++i) {
      PipelineOut out = model.forward(scenes[i].features);
      DetectionLossOut det =
          detection_loss(out.preds, assignments[i], scene_gts[i], anchors, pc.num_classes,
                         pc.loss);
      Tensor scene_loss = det.total;
      if (out.has_dist && pc.w_dep != 0.0) {
        DepthLoss dl = depth_focal_loss(out.dist.probs, depth_targets[i], gamma, alpha);
        const int valid = depth_targets[i].valid_count();
        if (dep_per_image) {
          scene_loss = add(scene_loss, scale(dl.loss, pc.w_dep));
        } else if (valid > 0) {
          dep_sum = add(dep_sum, scale(dl.loss, valid));  // back to a pixel sum
          dep_pixels += valid;
        }
        dep_v += dl.loss.value();
      }
      total = add(total, scene_loss);
      cls_v += det.cls.value();
      reg_v += det.reg.value();
    }
    total = scale(total, 1.0 / static_cast<double>(scenes.size()));
    if (!dep_per_image && dep_pixels > 0)
      total = add(total, scale(dep_sum, pc.w_dep / dep_pixels));
    const double loss_v = total.value();
    if (!std::isfinite(loss_v)) {
      std::ostringstream diag;
      diag << "train_toy: non-finite loss at step " << step << "; trailing losses:";
      const size_t from = res.loss_curve.size() > 5 ? res.loss_curve.size() - 5 : 0;
      for (size_t i = from; i < res.loss_curve.size(); ++i) diag << " " << res.loss_curve[i];
      diag << " (cls " << cls_v << ", reg " << reg_v << ", dep " << dep_v << ")";
      throw CheckError(diag.str());
    }
    total.backward();
    const double lr = cosine_lr(lr0, step, steps);
    opt.step(params, lr);
    res.loss_curve.push_back(loss_v);
    csv << step << "," << lr << "," << loss_v << "," << cls_v / scenes.size() << ","
        << reg_v / scenes.size() << "," << dep_v / scenes.size() << "\n";
    if (step == 10) res.loss_at_step10 = loss_v;
    res.final_det_loss = (cls_v + reg_v) / static_cast<double>(scenes.size());
  }
  res.final_loss = res.loss_curve.empty() ? 0.0 : res.loss_curve.back();
  if (steps <= 10 && !res.loss_curve.empty()) res.loss_at_step10 = res.loss_curve.front();
  res.curve_csv = csv.str();

  // evaluate on the training scenes
  const double score_thresh = cfg.get_double("score_thresh");
  const double nms_iou = cfg.get_double("nms_iou");
  const auto eval_ious = cfg.get_list("eval_ious");
  const auto class_names = cfg.get_names("classes");
  std::vector<EvalEntry> det_entries, gt_entries;
  std::vector<EvalBox3D> det_boxes, gt_boxes;
  if (!dump_dir.empty()) {
    std::filesystem::create_directories(std::filesystem::path(dump_dir) / "results");
    std::filesystem::create_directories(std::filesystem::path(dump_dir) / "gt");
  }
  for (size_t i = 0; i < scenes.size(); ++i) {
    auto dets = run_inference(model, scenes[i].features, anchors, scenes[i].calib, score_thresh,
                              nms_iou);
    if (!dump_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof name, "%06zu.txt", i);
      std::ofstream rf(std::filesystem::path(dump_dir) / "results" / name);
      rf << serialize_detections(dets, class_names);
      std::vector<KittiLabel> gl;
      for (const SceneBox& b : scenes[i].boxes)
        gl.push_back(b.to_label(static_cast<int>(class_names.size()), class_names));
      std::ofstream gf(std::filesystem::path(dump_dir) / "gt" / name);
      gf << serialize_labels(gl, FloatFormat::Full17);
    }
    for (const Detection3D& d : dets) {
      det_entries.push_back(
          {static_cast<int>(i), d.score, static_cast<int>(det_boxes.size())});
      det_boxes.push_back(
          {d.center3d[0], d.center3d[1], d.center3d[2], d.w3d, d.h3d, d.l3d, d.ry});
    }
    for (const SceneBox& b : scenes[i].boxes) {
      gt_entries.push_back({static_cast<int>(i), 0, static_cast<int>(gt_boxes.size())});
      gt_boxes.push_back(b.to_eval());
    }
  }
  auto iou_fn = [&](int d, int g) { return iou_3d(det_boxes[d], gt_boxes[g]); };
  for (double thr : eval_ious) {
    EvalCell cell;
    cell.cls = class_names[0];
    cell.metric = "AP3D";
    cell.iou_thresh = thr;
    cell.result = ap40(det_entries, gt_entries, iou_fn, thr);
    if (!res.ap3d && cell.result.ap) res.ap3d = cell.result.ap;
    res.report.cells.push_back(std::move(cell));
  }

  if (!checkpoint_path.empty()) save_checkpoint(params, checkpoint_path);
  return res;
}

void save_checkpoint(const std::vector<Tensor>& params, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open for write: " + path);
  f.write("MCKP", 4);
  uint32_t n = static_cast<uint32_t>(params.size());
  f.write(reinterpret_cast<const char*>(&n), 4);
  for (size_t i = 0; i < params.size(); ++i) {
    char name[16];
    const int len = std::snprintf(name, sizeof name, "p%04zu", i);
    uint32_t l = static_cast<uint32_t>(len);
    f.write(reinterpret_cast<const char*>(&l), 4);
    f.write(name, len);
    const Tensor& t = params[i];
    uint32_t rank = static_cast<uint32_t>(t.rank());
    f.write("TNSR", 4);
    f.write(reinterpret_cast<const char*>(&rank), 4);
    for (int d = 0; d < t.rank(); ++d) {
      uint64_t dim = static_cast<uint64_t>(t.dim(d));
      f.write(reinterpret_cast<const char*>(&dim), 8);
    }
    f.write(reinterpret_cast<const char*>(t.data().data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
  if (!f) throw InputError("short write: " + path);
}

std::vector<Tensor> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open: " + path);
  char magic[4];
  if (!f.read(magic, 4) || std::memcmp(magic, "MCKP", 4) != 0)
    throw InputError("not a checkpoint file: " + path);
  uint32_t n = 0;
  if (!f.read(reinterpret_cast<char*>(&n), 4) || n > 100000)
    throw InputError("bad checkpoint header: " + path);
  std::vector<Tensor> out;
  for (uint32_t i = 0; i < n; ++i) {
    uint32_t l = 0;
    if (!f.read(reinterpret_cast<char*>(&l), 4) || l > 256)
      throw InputError("bad checkpoint name length");
    std::string name(l, '\0');
    if (!f.read(name.data(), l)) throw InputError("truncated checkpoint");
    char tm[4];
    uint32_t rank = 0;
    if (!f.read(tm, 4) || std::memcmp(tm, "TNSR", 4) != 0 ||
        !f.read(reinterpret_cast<char*>(&rank), 4) || rank == 0 || rank > 8)
      throw InputError("bad checkpoint tensor header");
    Shape shape(rank);
    for (uint32_t d = 0; d < rank; ++d) {
      uint64_t dim = 0;
      if (!f.read(reinterpret_cast<char*>(&dim), 8) || dim == 0 || dim > (1u << 24))
        throw InputError("bad checkpoint tensor dimension");
      shape[d] = static_cast<int>(dim);
    }
    std::vector<double> data(shape_numel(shape));
    if (!f.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(data.size() * sizeof(double))))
      throw InputError("truncated checkpoint tensor");
    out.push_back(Tensor::from_data(std::move(shape), std::move(data)));
  }
  return out;
}

}  // namespace mono3d
