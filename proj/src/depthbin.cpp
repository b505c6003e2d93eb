#include "mono3d/depthbin.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mono3d {

DiscMethod disc_method_from_string(const std::string& s) {
  if (s == "UD") return DiscMethod::UD;
  if (s == "SID") return DiscMethod::SID;
  if (s == "LID") return DiscMethod::LID;
  throw InputError("unknown discretization method: " + s);
}

std::string to_string(DiscMethod m) {
  switch (m) {
    case DiscMethod::UD: return "UD";
    case DiscMethod::SID: return "SID";
    case DiscMethod::LID: return "LID";
  }
  return "?";
}

void DepthBinSpec::validate() const {
  if (!(d_min > 0.0) || !(d_min < d_max))
    throw CheckError("depth bin spec: requires 0 < d_min < d_max");
  if (num_bins < 2) throw CheckError("depth bin spec: requires D >= 2");
}

std::vector<double> boundaries(const DepthBinSpec& spec) {
  spec.validate();
  const int d = spec.num_bins;
  std::vector<double> edges(d + 1);
  switch (spec.method) {
    case DiscMethod::UD:
      for (int i = 0; i <= d; ++i)
        edges[i] = spec.d_min + (spec.d_max - spec.d_min) * i / d;
      break;
    case DiscMethod::SID: {
      const double l0 = std::log(spec.d_min), l1 = std::log(spec.d_max);
      for (int i = 0; i <= d; ++i) edges[i] = std::exp(l0 + (l1 - l0) * i / d);
      break;
    }
    case DiscMethod::LID: {
      const double step = (spec.d_max - spec.d_min) / (static_cast<double>(d) * (d + 1));
      for (int i = 0; i <= d; ++i)
        edges[i] = spec.d_min + step * static_cast<double>(i) * (i + 1);
      break;
    }
  }
  // endpoints are exact by contract regardless of rounding in the middle
  edges.front() = spec.d_min;
  edges.back() = spec.d_max;
  return edges;
}

int depth_to_bin(const DepthBinSpec& spec, double d) {
  if (!std::isfinite(d) || d < spec.d_min || d >= spec.d_max) return kInvalidBin;
  const auto edges = boundaries(spec);
  // greatest i with edges[i] <= d
  auto it = std::upper_bound(edges.begin(), edges.end(), d);
  int i = static_cast<int>(it - edges.begin()) - 1;
  return std::clamp(i, 0, spec.num_bins - 1);
}

int DepthTargetMap::valid_count() const {
  int n = 0;
  for (int b : bins) n += (b >= 0);
  return n;
}

DepthTargetMap rasterize_depth_gt(const std::vector<DepthPoint>& points, int height, int width,
                                  const DepthBinSpec& spec) {
  DepthTargetMap m;
  m.height = height;
  m.width = width;
  m.bins.assign(static_cast<size_t>(height) * width, kInvalidBin);
  m.depths.assign(static_cast<size_t>(height) * width, 0.0);
  for (const DepthPoint& p : points) {
    const int bin = depth_to_bin(spec, p.depth);
    if (bin == kInvalidBin) continue;
    const int y = static_cast<int>(std::lround(p.v));
    const int x = static_cast<int>(std::lround(p.u));
    if (y < 0 || y >= height || x < 0 || x >= width) continue;
    const size_t idx = static_cast<size_t>(y) * width + x;
    if (m.bins[idx] == kInvalidBin || p.depth < m.depths[idx]) {
      m.bins[idx] = bin;
      m.depths[idx] = p.depth;
    }
  }
  return m;
}

DepthLoss depth_focal_loss(const Tensor& pred_probs, const DepthTargetMap& target,
                           double gamma, double alpha) {
  if (pred_probs.rank() != 3 || pred_probs.dim(1) != target.height ||
      pred_probs.dim(2) != target.width)
    throw CheckError("depth_focal_loss: prediction/target shape mismatch");
  if (target.valid_count() == 0) return {Tensor::scalar(0.0), true};

  Tensor p = gather_bin_probs(pred_probs, target.bins);
  // FL(p) = -alpha * (1-p)^gamma * log(p), averaged over valid pixels
  Tensor fl = scale(mul(pow_scalar(sub(1.0, p), gamma), log(p)), -alpha);
  return {mean_all(fl), false};
}

std::string serialize_dbin(const DepthTargetMap& m, int num_bins) {
  std::ostringstream os;
  os << "DBIN " << m.height << " " << m.width << " " << num_bins << "\n";
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x)
      os << (x ? " " : "") << m.bins[static_cast<size_t>(y) * m.width + x];
    os << "\n";
  }
  return os.str();
}

DepthTargetMap parse_dbin(const std::string& text, int* num_bins_out) {
  std::istringstream is(text);
  std::string magic;
  int h = 0, w = 0, d = 0;
  if (!(is >> magic >> h >> w >> d) || magic != "DBIN")
    throw InputError("DBIN: bad header");
  if (h <= 0 || w <= 0 || d < 2) throw InputError("DBIN: bad dimensions");
  DepthTargetMap m;
  m.height = h;
  m.width = w;
  m.bins.resize(static_cast<size_t>(h) * w);
  m.depths.assign(m.bins.size(), 0.0);
  for (auto& b : m.bins) {
    if (!(is >> b)) throw InputError("DBIN: truncated bin data");
    if (b < kInvalidBin || b >= d) throw InputError("DBIN: bin value out of range");
  }
  if (num_bins_out) *num_bins_out = d;
  return m;
}

}  // namespace mono3d
