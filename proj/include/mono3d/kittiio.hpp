#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "mono3d/common.hpp"

namespace mono3d {

// One object row of a KITTI label/result file. Fifteen whitespace-separated
// fields, sixteen when a score is present. location is the bottom-center of
// the 3D box in camera coordinates; dims are stored file-order (h, w, l).
struct KittiLabel {
  std::string type;
  double truncated = 0.0;
  int occluded = 0;
  double alpha = 0.0;
  std::array<double, 4> bbox{};      // x1, y1, x2, y2 pixels
  std::array<double, 3> dims{};      // h, w, l meters
  std::array<double, 3> location{};  // X, Y, Z camera frame, bottom-center
  double rotation_y = 0.0;
  std::optional<double> score;

  bool is_dont_care() const { return type == "DontCare"; }
};

struct Calibration {
  // Row-major 3x4 camera projection matrix (the "P2" line).
  std::array<double, 12> p2{};

  double fx() const { return p2[0]; }
  double fy() const { return p2[5]; }
  double cx() const { return p2[2]; }
  double cy() const { return p2[6]; }

  static Calibration simple(double f, double cx, double cy);
  void validate() const;
};

// Parse errors carry 1-based line and column of the offending token.
std::vector<KittiLabel> parse_labels(const std::string& text);

// serialize modes: compat ("%.2f"-style) for devkit-shaped output,
// full precision (17 significant digits) for round-trip fixtures.
enum class FloatFormat { Compat2, Full17 };
std::string serialize_labels(const std::vector<KittiLabel>& labels,
                             FloatFormat fmt = FloatFormat::Full17);

Calibration parse_calib(const std::string& text);
std::string serialize_calib(const Calibration& c);

struct ProjectedPoint {
  double u = 0, v = 0;   // pixels
  double depth = 0;      // third homogeneous coordinate
};

// Homogeneous projection through P2; points with depth <= 0 are dropped.
std::vector<ProjectedPoint> project_points(const std::vector<std::array<double, 3>>& pts,
                                           const Calibration& calib);
ProjectedPoint project_point(const std::array<double, 3>& p, const Calibration& calib);

// Solves the full 3x4 system for (X,Y,Z) given pixel (u,v) and the
// homogeneous depth, so nonzero translation columns are handled exactly.
std::array<double, 3> backproject(double u, double v, double depth, const Calibration& calib);

// Affine pixel map for top-crop + resize preprocessing.
struct PixelTransform {
  double scale_u = 1, scale_v = 1;
  double offset_u = 0, offset_v = 0;

  std::array<double, 2> apply(double u, double v) const {
    return {u * scale_u + offset_u, v * scale_v + offset_v};
  }
  PixelTransform inverse() const;
};

// original (width x height) image, crop_top rows removed, result resized to
// target_w x target_h. Returns the original->network pixel transform.
PixelTransform preprocess_transform(int width, int height, int crop_top, int target_w,
                                    int target_h);
std::vector<KittiLabel> apply_to_labels(const PixelTransform& t,
                                        const std::vector<KittiLabel>& labels);
Calibration apply_to_calib(const PixelTransform& t, const Calibration& c);

// Horizontal mirror of labels and calibration for an image of given width.
// An involution: applying it twice restores the input.
std::pair<std::vector<KittiLabel>, Calibration> flip_horizontal(
    const std::vector<KittiLabel>& labels, const Calibration& calib, int width);

// Observation angle <-> global yaw. Both require Z > 0.
double alpha_from_ry(double ry, double x, double z);
double ry_from_alpha(double alpha, double x, double z);

// Eight corners of a 3D box in camera coordinates. location is the
// bottom-center, dims file-order (h, w, l), ry the yaw about the Y axis.
std::array<std::array<double, 3>, 8> box3d_corners(const std::array<double, 3>& location,
                                                   const std::array<double, 3>& dims, double ry);

// Axis-aligned 2D bounds (x1, y1, x2, y2) of the projected corners.
std::array<double, 4> project_box3d(const std::array<double, 3>& location,
                                    const std::array<double, 3>& dims, double ry,
                                    const Calibration& calib);

// Binary point list: little-endian float32 (x, y, z, reflectance) quadruples.
std::vector<std::array<double, 3>> load_points_bin(const std::string& path);
void save_points_bin(const std::vector<std::array<double, 3>>& pts, const std::string& path);

}  // namespace mono3d
