#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "mono3d/kittiio.hpp"

using namespace mono3d;

namespace {

KittiLabel random_label(Rng& rng, bool with_score = false) {
  KittiLabel l;
  l.type = (rng.uniform() < 0.5) ? "Car" : "Pedestrian";
  l.truncated = rng.uniform(0.0, 1.0);
  l.occluded = rng.uniform_int(0, 3);
  l.dims = {rng.uniform(1.2, 1.8), rng.uniform(1.4, 1.8), rng.uniform(3.2, 4.5)};
  l.location = {rng.uniform(-8.0, 8.0), rng.uniform(0.5, 2.0), rng.uniform(8.0, 40.0)};
  l.rotation_y = rng.uniform(-kPi, kPi);
  l.alpha = alpha_from_ry(l.rotation_y, l.location[0], l.location[2]);
  double cx = rng.uniform(200, 1000), cy = rng.uniform(100, 300);
  double w = rng.uniform(20, 200), h = rng.uniform(15, 120);
  l.bbox = {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
  if (with_score) l.score = rng.uniform(0.0, 1.0);
  return l;
}

}  // namespace

TEST_CASE("label parse: empty, round trip, malformed") {
  CHECK(parse_labels("").empty());
  CHECK(parse_labels("\n\n").empty());

  Rng rng(1);
  std::vector<KittiLabel> ls;
  for (int i = 0; i < 6; ++i) ls.push_back(random_label(rng, i % 2 == 0));
  ls.push_back([] {
    KittiLabel dc;
    dc.type = "DontCare";
    dc.truncated = -1;
    dc.occluded = -1;
    dc.alpha = -10;
    dc.bbox = {503.89, 169.71, 590.61, 190.13};
    dc.dims = {-1, -1, -1};
    dc.location = {-1000, -1000, -1000};
    dc.rotation_y = -10;
    return dc;
  }());

  std::string text = serialize_labels(ls, FloatFormat::Full17);
  auto back = parse_labels(text);
  REQUIRE(back.size() == ls.size());
  CHECK(back.back().is_dont_care());
  // canonical round trip is byte-exact
  CHECK(serialize_labels(back, FloatFormat::Full17) == text);

  // compat mode emits 2-decimal fields
  std::string compat = serialize_labels({ls[0]}, FloatFormat::Compat2);
  CHECK(compat.find('.') != std::string::npos);
  auto reparsed = parse_labels(compat);
  CHECK(reparsed.size() == 1);

  // a 14-field line fails with position info
  try {
    parse_labels("Car 0.0 0 0.0 1 2 3 4 1 1 1 0 0 10");
    FAIL("expected InputError");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_labels("Car 0.0 0 xyz 1 2 3 4 1 1 1 0 0 10 0.5"), InputError);
  CHECK_THROWS_AS(parse_labels("Car 0.0 7 0.0 1 2 3 4 1 1 1 0 0 10 0.5"), InputError);
  CHECK_THROWS_AS(parse_labels("Car 0.0 0 0.0 5 2 3 4 1 1 1 0 0 10 0.5"), InputError);  // x1>x2
}

TEST_CASE("label fuzz: structured errors only") {
  Rng rng(42);
  std::vector<KittiLabel> ls;
  for (int i = 0; i < 4; ++i) ls.push_back(random_label(rng));
  std::string canon = serialize_labels(ls, FloatFormat::Compat2);
  const std::string charset = "0123456789.eE+- \tCarDontx\n";
  for (int trial = 0; trial < 20000; ++trial) {
    std::string s = canon;
    int edits = rng.uniform_int(1, 6);
    for (int e = 0; e < edits && !s.empty(); ++e) {
      int pos = rng.uniform_int(0, static_cast<int>(s.size()) - 1);
      switch (rng.uniform_int(0, 2)) {
        case 0: s[pos] = charset[rng.uniform_int(0, static_cast<int>(charset.size()) - 1)]; break;
        case 1: s.erase(pos, 1); break;
        default: s.insert(pos, 1, charset[rng.uniform_int(0, static_cast<int>(charset.size()) - 1)]);
      }
    }
    try {
      (void)parse_labels(s);
    } catch (const InputError&) {
      // structured failure is the contract
    }
  }
  CHECK(true);
}

TEST_CASE("calibration parse and round trip") {
  Calibration c = parse_calib(
      "P0: 1 0 0 0 0 1 0 0 0 0 1 0\n"
      "P2: 700 0 600 0 0 700 180 0 0 0 1 0\n");
  CHECK(c.fx() == 700);
  CHECK(c.cx() == 600);
  CHECK(c.cy() == 180);

  CHECK_THROWS_AS(parse_calib("P2: 1 2 3 4 5 6 7 8 9 10 11\n"), InputError);
  CHECK_THROWS_AS(parse_calib("P3: 1 2 3 4 5 6 7 8 9 10 11 12\n"), InputError);

  // round trip preserves all 12 numbers exactly through 17-digit decimal
  Rng rng(3);
  Calibration r;
  r.p2 = {721.5377, 0, 609.5593, 44.85728, 0, 721.5377, 172.854, 0.2163791, 0, 0, 1, 0.002745884};
  Calibration back = parse_calib(serialize_calib(r));
  for (int i = 0; i < 12; ++i) CHECK(back.p2[i] == r.p2[i]);
}

TEST_CASE("projection: optical axis, pinhole similarity, matrix oracle") {
  Calibration c = Calibration::simple(700, 600, 180);
  auto q = project_point({0, 0, 15.0}, c);
  CHECK(q.u == doctest::Approx(600));
  CHECK(q.v == doctest::Approx(180));
  CHECK(q.depth == doctest::Approx(15.0));

  // doubling Z halves the offset from the principal point
  auto a = project_point({2.0, 1.0, 10.0}, c);
  auto b = project_point({2.0, 1.0, 20.0}, c);
  CHECK((a.u - 600) == doctest::Approx(2 * (b.u - 600)).epsilon(1e-12));
  CHECK((a.v - 180) == doctest::Approx(2 * (b.v - 180)).epsilon(1e-12));

  // scalar 3x4 multiply oracle on a calibration with translation
  Calibration t;
  t.p2 = {721.5, 0, 609.6, 44.9, 0, 721.5, 172.8, 0.22, 0, 0, 1, 0.0027};
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    std::array<double, 3> p = {rng.uniform(-20, 20), rng.uniform(-5, 5), rng.uniform(1, 60)};
    double w = t.p2[8] * p[0] + t.p2[9] * p[1] + t.p2[10] * p[2] + t.p2[11];
    double u = (t.p2[0] * p[0] + t.p2[1] * p[1] + t.p2[2] * p[2] + t.p2[3]) / w;
    double v = (t.p2[4] * p[0] + t.p2[5] * p[1] + t.p2[6] * p[2] + t.p2[7]) / w;
    auto pr = project_point(p, t);
    CHECK(std::abs(pr.u - u) < 1e-12);
    CHECK(std::abs(pr.v - v) < 1e-12);
    CHECK(std::abs(pr.depth - w) < 1e-12);
  }

  // points behind the camera are dropped
  auto kept = project_points({{0, 0, 5}, {0, 0, -5}}, c);
  CHECK(kept.size() == 1);
}

TEST_CASE("backproject inverts projection, translation included") {
  Rng rng(13);
  Calibration zero_t = Calibration::simple(700, 600, 180);
  Calibration with_t;
  with_t.p2 = {721.5, 0, 609.6, 44.9, 0, 721.5, 172.8, 0.22, 0, 0, 1, 0.0027};
  for (const Calibration& c : {zero_t, with_t}) {
    for (int i = 0; i < 300; ++i) {
      std::array<double, 3> p = {rng.uniform(-15, 15), rng.uniform(-4, 4), rng.uniform(2, 70)};
      auto q = project_point(p, c);
      auto back = backproject(q.u, q.v, q.depth, c);
      for (int k = 0; k < 3; ++k) CHECK(std::abs(back[k] - p[k]) < 1e-9);
    }
  }
  // direct evaluation: fx=700, cx=600, u=670, z=10 -> X=1
  auto r = backproject(670, 180, 10, zero_t);
  CHECK(r[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r[1] == doctest::Approx(0.0));
  CHECK(r[2] == doctest::Approx(10.0));
  CHECK_THROWS_AS(backproject(0, 0, -1, zero_t), CheckError);
}

TEST_CASE("preprocess transform") {
  // crop 100 then resize back to the cropped size: pure translation by (0,-100)
  auto t = preprocess_transform(1242, 375, 100, 1242, 275);
  CHECK(t.scale_u == doctest::Approx(1.0));
  CHECK(t.scale_v == doctest::Approx(1.0));
  CHECK(t.offset_v == doctest::Approx(-100.0));

  // crop 100, resize 275 -> 288: bottom edge maps to the new bottom edge
  auto t2 = preprocess_transform(1242, 375, 100, 1280, 288);
  auto p = t2.apply(0, 375);
  CHECK(p[1] == doctest::Approx(288.0).epsilon(1e-12));
  CHECK(t2.apply(621, 100)[1] == doctest::Approx(0.0));

  // transform composed with its inverse is the identity
  auto inv = t2.inverse();
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    double u = rng.uniform(0, 1242), v = rng.uniform(0, 375);
    auto f = t2.apply(u, v);
    auto b = inv.apply(f[0], f[1]);
    CHECK(std::abs(b[0] - u) < 1e-12);
    CHECK(std::abs(b[1] - v) < 1e-12);
  }

  // calibration mapped through the transform projects consistently
  Calibration c = Calibration::simple(721.5, 609.6, 172.8);
  Calibration cc = apply_to_calib(t2, c);
  for (int i = 0; i < 50; ++i) {
    std::array<double, 3> pt = {rng.uniform(-10, 10), rng.uniform(-2, 3), rng.uniform(5, 50)};
    auto before = project_point(pt, c);
    auto mapped = t2.apply(before.u, before.v);
    auto after = project_point(pt, cc);
    CHECK(std::abs(after.u - mapped[0]) < 1e-9);
    CHECK(std::abs(after.v - mapped[1]) < 1e-9);
  }

  CHECK_THROWS_AS(preprocess_transform(100, 50, 60, 100, 50), CheckError);
  CHECK_THROWS_AS(preprocess_transform(100, 50, 10, 0, 40), CheckError);
}

TEST_CASE("flip: involution, symmetry axis, projection consistency") {
  Rng rng(21);
  Calibration c = Calibration::simple(721.5, 620.7, 172.8);
  const int width = 1242;

  std::vector<KittiLabel> ls;
  for (int i = 0; i < 12; ++i) {
    KittiLabel l = random_label(rng);
    l.bbox = project_box3d(l.location, l.dims, l.rotation_y, c);
    ls.push_back(l);
  }

  auto [f1, c1] = flip_horizontal(ls, c, width);
  auto [f2, c2] = flip_horizontal(f1, c1, width);
  REQUIRE(f2.size() == ls.size());
  for (size_t i = 0; i < ls.size(); ++i) {
    for (int k = 0; k < 4; ++k) CHECK(std::abs(f2[i].bbox[k] - ls[i].bbox[k]) < 1e-10);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(f2[i].location[k] - ls[i].location[k]) < 1e-10);
    CHECK(std::abs(wrap_angle(f2[i].rotation_y - ls[i].rotation_y)) < 1e-10);
    CHECK(std::abs(wrap_angle(f2[i].alpha - ls[i].alpha)) < 1e-10);
  }
  for (int k = 0; k < 12; ++k) CHECK(std::abs(c2.p2[k] - c.p2[k]) < 1e-10);

  // centered object on the symmetry axis keeps X=0 and ry=pi/2
  KittiLabel mid = random_label(rng);
  mid.location[0] = 0.0;
  mid.rotation_y = kPi / 2;
  auto [fm, cm] = flip_horizontal({mid}, c, width);
  CHECK(fm[0].location[0] == 0.0);
  CHECK(fm[0].rotation_y == doctest::Approx(kPi / 2));

  // re-projected 2D box of the flipped 3D box equals the flipped 2D box
  for (size_t i = 0; i < ls.size(); ++i) {
    auto reproj = project_box3d(f1[i].location, f1[i].dims, f1[i].rotation_y, c1);
    for (int k = 0; k < 4; ++k) CHECK(std::abs(reproj[k] - f1[i].bbox[k]) < 1.0);
  }
}

TEST_CASE("alpha conversions") {
  CHECK(alpha_from_ry(0.7, 0.0, 10.0) == doctest::Approx(0.7));
  CHECK(alpha_from_ry(0.0, 5.0, 5.0) == doctest::Approx(-kPi / 4).epsilon(1e-12));
  Rng rng(6);
  for (int i = 0; i < 500; ++i) {
    double ry = rng.uniform(-kPi, kPi);
    double x = rng.uniform(-20, 20), z = rng.uniform(1, 60);
    double a = alpha_from_ry(ry, x, z);
    CHECK(a > -kPi);
    CHECK(a <= kPi);
    CHECK(std::abs(wrap_angle(ry_from_alpha(a, x, z) - ry)) < 1e-12);
  }
  CHECK_THROWS_AS(alpha_from_ry(0, 0, -1), CheckError);
}

TEST_CASE("point bin i/o") {
  std::vector<std::array<double, 3>> pts = {{1.5, -2.25, 30.0}, {0.0, 0.5, 7.125}};
  std::string path = "points_roundtrip.bin";
  save_points_bin(pts, path);
  auto back = load_points_bin(path);
  REQUIRE(back.size() == 2);
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 3; ++k) CHECK(back[i][k] == doctest::Approx(pts[i][k]).epsilon(1e-6));
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_points_bin("missing.bin"), InputError);
}
