#include "mono3d/kittiio.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

namespace mono3d {

namespace {

struct Token {
  std::string text;
  int col = 0;  // 1-based column of the first character
};

std::vector<Token> tokenize(const std::string& line) {
  std::vector<Token> out;
  size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    out.push_back({line.substr(start, i - start), static_cast<int>(start) + 1});
  }
  return out;
}

[[noreturn]] void parse_fail(const std::string& what, int line, int col) {
  throw InputError(what + " at line " + std::to_string(line) + ", column " + std::to_string(col));
}

double parse_double(const Token& t, int line) {
  const char* s = t.text.c_str();
  char* end = nullptr;
  double v = std::strtod(s, &end);
  if (end == s || *end != '\0' || !std::isfinite(v))
    parse_fail("expected a number, got '" + t.text + "'", line, t.col);
  return v;
}

int parse_int_field(const Token& t, int line) {
  double v = parse_double(t, line);
  if (v != std::floor(v)) parse_fail("expected an integer, got '" + t.text + "'", line, t.col);
  return static_cast<int>(v);
}

std::string format_double(double v, FloatFormat fmt) {
  char buf[64];
  if (fmt == FloatFormat::Compat2)
    std::snprintf(buf, sizeof buf, "%.2f", v);
  else
    std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<KittiLabel> parse_labels(const std::string& text) {
  std::vector<KittiLabel> out;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto toks = tokenize(line);
    if (toks.empty()) continue;
    if (toks.size() != 15 && toks.size() != 16)
      parse_fail("expected 15 or 16 fields, got " + std::to_string(toks.size()), lineno,
                 toks.back().col);
    KittiLabel l;
    l.type = toks[0].text;
    l.truncated = parse_double(toks[1], lineno);
    l.occluded = parse_int_field(toks[2], lineno);
    l.alpha = parse_double(toks[3], lineno);
    for (int i = 0; i < 4; ++i) l.bbox[i] = parse_double(toks[4 + i], lineno);
    for (int i = 0; i < 3; ++i) l.dims[i] = parse_double(toks[8 + i], lineno);
    for (int i = 0; i < 3; ++i) l.location[i] = parse_double(toks[11 + i], lineno);
    l.rotation_y = parse_double(toks[14], lineno);
    if (toks.size() == 16) l.score = parse_double(toks[15], lineno);
    if (!l.is_dont_care()) {
      // -1 is the unknown/result-file sentinel; DontCare rows skip the checks
      if ((l.truncated < 0.0 || l.truncated > 1.0) && l.truncated != -1.0)
        parse_fail("truncated outside [0,1]", lineno, toks[1].col);
      if ((l.occluded < 0 || l.occluded > 3) && l.occluded != -1)
        parse_fail("occluded outside {0,1,2,3}", lineno, toks[2].col);
    }
    if (l.bbox[0] > l.bbox[2]) parse_fail("x1 > x2", lineno, toks[4].col);
    if (l.bbox[1] > l.bbox[3]) parse_fail("y1 > y2", lineno, toks[5].col);
    out.push_back(std::move(l));
  }
  return out;
}

std::string serialize_labels(const std::vector<KittiLabel>& labels, FloatFormat fmt) {
  std::ostringstream os;
  for (const auto& l : labels) {
    os << l.type << " " << format_double(l.truncated, fmt) << " " << l.occluded << " "
       << format_double(l.alpha, fmt);
    for (double v : l.bbox) os << " " << format_double(v, fmt);
    for (double v : l.dims) os << " " << format_double(v, fmt);
    for (double v : l.location) os << " " << format_double(v, fmt);
    os << " " << format_double(l.rotation_y, fmt);
    if (l.score) os << " " << format_double(*l.score, fmt);
    os << "\n";
  }
  return os.str();
}

Calibration Calibration::simple(double f, double cx, double cy) {
  Calibration c;
  c.p2 = {f, 0, cx, 0, 0, f, cy, 0, 0, 0, 1, 0};
  return c;
}

void Calibration::validate() const {
  if (p2[10] == 0.0) throw InputError("calibration: P2[2][2] is zero");
  if (!(fx() > 0.0) || !(fy() > 0.0)) throw InputError("calibration: non-positive focal length");
  for (double v : p2)
    if (!std::isfinite(v)) throw InputError("calibration: non-finite entry");
}

Calibration parse_calib(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto toks = tokenize(line);
    if (toks.empty() || toks[0].text != "P2:") continue;
    if (toks.size() != 13)
      parse_fail("P2 line needs exactly 12 numbers, got " + std::to_string(toks.size() - 1),
                 lineno, toks[0].col);
    Calibration c;
    for (int i = 0; i < 12; ++i) c.p2[i] = parse_double(toks[1 + i], lineno);
    if (c.p2[10] == 0.0) parse_fail("P2[2][2] must be nonzero", lineno, toks[11].col);
    if (c.p2[10] != 1.0)
      for (auto& v : c.p2) v /= c.p2[10];
    c.validate();
    return c;
  }
  throw InputError("calibration: no P2 line found");
}

std::string serialize_calib(const Calibration& c) {
  std::ostringstream os;
  os << "P2:";
  for (double v : c.p2) os << " " << format_double(v, FloatFormat::Full17);
  os << "\n";
  return os.str();
}

ProjectedPoint project_point(const std::array<double, 3>& p, const Calibration& c) {
  const auto& m = c.p2;
  double w = m[8] * p[0] + m[9] * p[1] + m[10] * p[2] + m[11];
  double uw = m[0] * p[0] + m[1] * p[1] + m[2] * p[2] + m[3];
  double vw = m[4] * p[0] + m[5] * p[1] + m[6] * p[2] + m[7];
  return {uw / w, vw / w, w};
}

std::vector<ProjectedPoint> project_points(const std::vector<std::array<double, 3>>& pts,
                                           const Calibration& calib) {
  std::vector<ProjectedPoint> out;
  out.reserve(pts.size());
  for (const auto& p : pts) {
    ProjectedPoint q = project_point(p, calib);
    if (q.depth > 0.0) out.push_back(q);
  }
  return out;
}

std::array<double, 3> backproject(double u, double v, double depth, const Calibration& c) {
  if (!(depth > 0.0)) throw CheckError("backproject: depth must be positive");
  const auto& m = c.p2;
  // [u*d, v*d, d]^T = P2 * [X Y Z 1]^T, a 3x3 linear system in (X, Y, Z)
  double a[3][3] = {{m[0], m[1], m[2]}, {m[4], m[5], m[6]}, {m[8], m[9], m[10]}};
  double b[3] = {u * depth - m[3], v * depth - m[7], depth - m[11]};
  double det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
               a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
               a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
  if (std::abs(det) < 1e-12) throw CheckError("backproject: singular projection matrix");
  auto solve = [&](int col) {
    double t[3][3];
    std::memcpy(t, a, sizeof t);
    for (int r = 0; r < 3; ++r) t[r][col] = b[r];
    return (t[0][0] * (t[1][1] * t[2][2] - t[1][2] * t[2][1]) -
            t[0][1] * (t[1][0] * t[2][2] - t[1][2] * t[2][0]) +
            t[0][2] * (t[1][0] * t[2][1] - t[1][1] * t[2][0])) /
           det;
  };
  return {solve(0), solve(1), solve(2)};
}

PixelTransform PixelTransform::inverse() const {
  PixelTransform t;
  t.scale_u = 1.0 / scale_u;
  t.scale_v = 1.0 / scale_v;
  t.offset_u = -offset_u / scale_u;
  t.offset_v = -offset_v / scale_v;
  return t;
}

PixelTransform preprocess_transform(int width, int height, int crop_top, int target_w,
                                    int target_h) {
  if (crop_top < 0 || crop_top >= height) throw CheckError("preprocess: crop_top out of range");
  if (target_w <= 0 || target_h <= 0 || width <= 0)
    throw CheckError("preprocess: degenerate target size");
  PixelTransform t;
  t.scale_u = static_cast<double>(target_w) / width;
  t.scale_v = static_cast<double>(target_h) / (height - crop_top);
  t.offset_u = 0.0;
  t.offset_v = -crop_top * t.scale_v;
  return t;
}

std::vector<KittiLabel> apply_to_labels(const PixelTransform& t,
                                        const std::vector<KittiLabel>& labels) {
  std::vector<KittiLabel> out = labels;
  for (auto& l : out) {
    auto p1 = t.apply(l.bbox[0], l.bbox[1]);
    auto p2 = t.apply(l.bbox[2], l.bbox[3]);
    l.bbox = {p1[0], p1[1], p2[0], p2[1]};
  }
  return out;
}

Calibration apply_to_calib(const PixelTransform& t, const Calibration& c) {
  Calibration out = c;
  for (int j = 0; j < 4; ++j) {
    out.p2[j] = t.scale_u * c.p2[j] + t.offset_u * c.p2[8 + j];
    out.p2[4 + j] = t.scale_v * c.p2[4 + j] + t.offset_v * c.p2[8 + j];
  }
  return out;
}

std::pair<std::vector<KittiLabel>, Calibration> flip_horizontal(
    const std::vector<KittiLabel>& labels, const Calibration& calib, int width) {
  if (width <= 0) throw CheckError("flip_horizontal: width must be positive");
  const double w1 = width - 1.0;
  std::vector<KittiLabel> out = labels;
  for (auto& l : out) {
    const double x1 = l.bbox[0], x2 = l.bbox[2];
    l.bbox[0] = w1 - x2;
    l.bbox[2] = w1 - x1;
    if (l.is_dont_care()) continue;  // sentinel 3D fields stay untouched
    l.location[0] = -l.location[0];
    const double ry = l.rotation_y;
    l.rotation_y = ry >= 0.0 ? wrap_angle(kPi - ry) : wrap_angle(-kPi - ry);
    l.alpha = alpha_from_ry(l.rotation_y, l.location[0], l.location[2]);
  }
  Calibration c = calib;
  c.p2[2] = w1 - calib.p2[2];   // principal point mirrors
  c.p2[3] = -calib.p2[3];       // translation column sign-flips with the axis
  return {std::move(out), c};
}

double alpha_from_ry(double ry, double x, double z) {
  if (!(z > 0.0)) throw CheckError("alpha_from_ry: Z must be positive");
  return wrap_angle(ry - std::atan2(x, z));
}

double ry_from_alpha(double alpha, double x, double z) {
  if (!(z > 0.0)) throw CheckError("ry_from_alpha: Z must be positive");
  return wrap_angle(alpha + std::atan2(x, z));
}

std::array<std::array<double, 3>, 8> box3d_corners(const std::array<double, 3>& location,
                                                   const std::array<double, 3>& dims, double ry) {
  const double h = dims[0], w = dims[1], l = dims[2];
  const double c = std::cos(ry), s = std::sin(ry);
  std::array<std::array<double, 3>, 8> out;
  int k = 0;
  for (double xs : {-l / 2, l / 2})
    for (double ys : {0.0, -h})
      for (double zs : {-w / 2, w / 2})
        out[k++] = {location[0] + xs * c + zs * s, location[1] + ys,
                    location[2] - xs * s + zs * c};
  return out;
}

std::array<double, 4> project_box3d(const std::array<double, 3>& location,
                                    const std::array<double, 3>& dims, double ry,
                                    const Calibration& calib) {
  auto corners = box3d_corners(location, dims, ry);
  double x1 = 1e300, y1 = 1e300, x2 = -1e300, y2 = -1e300;
  for (const auto& p : corners) {
    ProjectedPoint q = project_point(p, calib);
    if (q.depth <= 0.0) throw CheckError("project_box3d: corner behind the camera");
    x1 = std::min(x1, q.u);
    y1 = std::min(y1, q.v);
    x2 = std::max(x2, q.u);
    y2 = std::max(y2, q.v);
  }
  return {x1, y1, x2, y2};
}

std::vector<std::array<double, 3>> load_points_bin(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open: " + path);
  f.seekg(0, std::ios::end);
  const auto bytes = static_cast<size_t>(f.tellg());
  f.seekg(0);
  if (bytes % 16 != 0) throw InputError("point file size is not a multiple of 16: " + path);
  std::vector<float> raw(bytes / 4);
  if (!f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes)))
    throw InputError("short read: " + path);
  std::vector<std::array<double, 3>> pts(raw.size() / 4);
  for (size_t i = 0; i < pts.size(); ++i)
    pts[i] = {raw[4 * i], raw[4 * i + 1], raw[4 * i + 2]};  // reflectance ignored
  return pts;
}

void save_points_bin(const std::vector<std::array<double, 3>>& pts, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open for write: " + path);
  for (const auto& p : pts) {
    float q[4] = {static_cast<float>(p[0]), static_cast<float>(p[1]), static_cast<float>(p[2]),
                  0.0f};
    f.write(reinterpret_cast<const char*>(q), 16);
  }
}

}  // namespace mono3d
