#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mono3d/config.hpp"
#include "mono3d/detect.hpp"
#include "mono3d/dfe.hpp"
#include "mono3d/dtr.hpp"
#include "mono3d/synthetic.hpp"

namespace mono3d {

// Full model: context convolution in parallel with the depth branch, the
// transformer fusing both streams, and the anchor head on top. The ablation
// switches swap the depth branch for a pass-through and zero the positional
// encoding.
struct PipelineConfig {
  int channels = 32, feat_h = 12, feat_w = 12;
  int num_bins = 24, merge_scale = 4;
  int stride = 8;
  AttentionConfig attention;
  std::vector<double> ratios = {0.5, 1.0, 1.5};
  std::vector<double> scales = {7, 10, 14, 19};
  int num_classes = 1;
  DepthBinSpec bin_spec;
  DetectionLossCfg loss;
  double w_dep = 1.0;
  bool use_dfe = true;
  bool use_dpe = true;

  static PipelineConfig from_config(const RunConfig& cfg);
  int templates() const { return static_cast<int>(ratios.size() * scales.size()); }
};

struct PipelineOut {
  Tensor preds;  // [A, 11 + K]
  DepthDistribution dist;
  bool has_dist = false;
};

struct Pipeline {
  PipelineConfig cfg;
  Conv2dParams context_conv;
  DfeState dfe;
  DpeState dpe;
  DtrState dtr;
  Conv2dParams head_conv1, head_conv2;

  static Pipeline create(const PipelineConfig& cfg, Rng& rng);
  PipelineOut forward(const Tensor& features) const;
  std::vector<Tensor> params() const;
};

struct Adam {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<std::vector<double>> m, v;
  int64_t t = 0;

  void step(std::vector<Tensor>& params, double lr);
};

double cosine_lr(double lr0, int step, int total_steps);

// Decode + threshold + NMS for one scene's predictions.
std::vector<Detection3D> run_inference(const Pipeline& model, const Tensor& features,
                                       const AnchorGrid& anchors, const Calibration& calib,
                                       double score_thresh, double nms_iou);

struct TrainResult {
  std::vector<double> loss_curve;         // total loss per step
  double loss_at_step10 = 0;              // reference point for the reduction check
  double final_loss = 0;
  double final_det_loss = 0;              // cls + reg only; comparable across ablations
  std::optional<double> ap3d;             // AP40 3D at eval_iou on the training scenes
  EvalReport report;
  int num_steps = 0;
  std::string curve_csv;
};

// When dump_dir is set, per-scene KITTI files land in dump_dir/results and
// dump_dir/gt (one file per image) for the eval command to consume.
TrainResult train_toy(const RunConfig& cfg, bool use_dfe = true, bool use_dpe = true,
                      const std::string& checkpoint_path = "",
                      const std::string& dump_dir = "");

// Checkpoint: "MCKP" magic, u32 param count, then per parameter a u32 name
// length, the name, and a TNSR blob.
void save_checkpoint(const std::vector<Tensor>& params, const std::string& path);
std::vector<Tensor> load_checkpoint(const std::string& path);

}  // namespace mono3d
