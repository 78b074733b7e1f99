#include "doctest.h"
#include "helpers.hpp"

#include "tignn/io.hpp"
#include "tignn/render.hpp"

#include <limits>
#include <random>

using namespace tignn;
using namespace tignn::render;

namespace {

Camera<Scalar> axis_camera(double z, double fov, double n, double f) {
  Camera<Scalar> c;
  c.translation = Vec3(0, 0, z);
  c.fov = fov;
  c.z_near = n;
  c.z_far = f;
  return c;
}

// Side view of the desk beam used for the golden image.
Image golden_scene() {
  static const SolidMesh mesh = build_beam_mesh(10, 10, 40, 2, 2, 8);
  SurfaceView v;
  v.mesh = &mesh;
  v.positions = mesh.rest_positions;
  v.field.resize(static_cast<std::size_t>(mesh.node_count()));
  for (int i = 0; i < mesh.node_count(); ++i) v.field[static_cast<std::size_t>(i)] = mesh.rest_positions(i, 2) / 20 - 1;
  auto cam = look_at<Scalar>(Vec3(60, -90, 50), Vec3(5, 5, 20), Vec3::UnitZ(), std::numbers::pi / 3, 1, 1000);
  RenderSettings s;
  s.width = 96;
  s.height = 64;
  return render_surfaces(std::span(&v, 1), cam, s);
}

}  // namespace

TEST_SUITE("render") {

TEST_CASE("model matrix") {
  ModelPose<Scalar> pose;
  CHECK(model_matrix(pose) == Mat4::Identity());
  pose.translation = Vec3(1, 2, 3);
  CHECK(model_matrix(pose).col(3) == Vec4(1, 2, 3, 1));
  ModelPose<Scalar> p2;
  p2.scale = Vec3::Constant(2);
  p2.translation = Vec3(1, 0, 0);
  CHECK((model_matrix(p2) * Vec4(1, 1, 1, 1)).head<3>() == Vec3(3, 2, 2));
}

TEST_CASE("view matrix") {
  Camera<Scalar> cam;
  CHECK(view_matrix(cam) == Mat4::Identity());
  cam.translation = Vec3(0, 0, 5);
  CHECK((view_matrix(cam) * Vec4(0, 0, 0, 1)).head<3>() == Vec3(0, 0, -5));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 1);
  for (int k = 0; k < 10; ++k) {
    Camera<Scalar> c;
    c.rotation = Eigen::Quaterniond(n(rng), n(rng), n(rng), n(rng)).normalized().toRotationMatrix();
    c.translation = Vec3(n(rng), n(rng), n(rng)) * 10;
    CHECK((view_matrix(c) * pose_matrix(c) - Mat4::Identity()).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("projection matrix hand values") {
  const auto p = projection_matrix(axis_camera(0, std::numbers::pi / 2, 1, 3));
  Mat4 hand = Mat4::Zero();
  hand(0, 0) = 1;
  hand(1, 1) = 1;
  hand(2, 2) = -2;
  hand(2, 3) = -3;
  hand(3, 2) = -1;
  CHECK(p == hand);

  const auto q = projection_matrix(axis_camera(0, 1.0, 2, 50));
  CHECK(project<Scalar>(q, Vec3(0, 0, -2)).ndc.z() == doctest::Approx(-1).epsilon(1e-15));
  CHECK(project<Scalar>(q, Vec3(0, 0, -50)).ndc.z() == doctest::Approx(1).epsilon(1e-15));
}

TEST_CASE("project") {
  CHECK(project<Scalar>(Mat4::Identity(), Vec3(0.25, -0.5, 0.75)).ndc == Vec3(0.25, -0.5, 0.75));

  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0, 1);
  Camera<Scalar> c = look_at<Scalar>(Vec3(30, -40, 20), Vec3(0, 0, 5), Vec3::UnitZ(), 1.0, 1, 200);
  ModelPose<Scalar> pose;
  pose.translation = Vec3(1, 2, 3);
  pose.rotation = Eigen::AngleAxisd(0.4, Vec3::UnitY()).toRotationMatrix();
  const Mat4 P = projection_matrix(c), V = view_matrix(c), M = model_matrix(pose);
  for (int k = 0; k < 20; ++k) {
    const Vec3 x(n(rng), n(rng), n(rng));
    const auto a = project<Scalar>(P * (V * M), x), b = project<Scalar>((P * V) * M, x);
    CHECK((a.ndc - b.ndc).cwiseAbs().maxCoeff() <= 1e-12);
  }

  // camera at z = 5 looking down -z, fov pi/2, near 1, far 10: the origin is
  // 5 in front, ndc depth = (-(11/9) * -5 - 20/9) / 5 = 7/9
  const auto o = project<Scalar>(mvp_matrix(axis_camera(5, std::numbers::pi / 2, 1, 10), ModelPose<Scalar>{}),
                                 Vec3::Zero());
  CHECK(o.ndc.x() == 0);
  CHECK(o.ndc.y() == 0);
  CHECK(o.ndc.z() == doctest::Approx(7.0 / 9.0).epsilon(1e-15));
  CHECK(o.clip(3) == 5);
}

TEST_CASE("phong") {
  PhongMaterial<Scalar> m;
  m.k_a = m.k_d = m.k_s = 1;
  m.beta = 1;
  const Vec3 n = Vec3::UnitZ();
  CHECK(phong(m, n, n, n) == Vec3::Ones());
  m.i_a = m.i_d = m.i_s = Vec3::Constant(0.2);
  CHECK((phong(m, n, n, n) - Vec3::Constant(0.6)).cwiseAbs().maxCoeff() <= 1e-15);

  // l orthogonal to n: r = -l; viewing along r gives k_s i_s
  PhongMaterial<Scalar> s;
  s.k_a = 0;
  s.k_d = 0.7;
  s.k_s = 0.4;
  s.beta = 8;
  const Vec3 l = Vec3::UnitX();
  CHECK((phong(s, n, l, Vec3(-l)) - Vec3::Constant(0.4)).cwiseAbs().maxCoeff() <= 1e-15);

  PhongMaterial<Scalar> back;
  back.k_a = 0.1;
  CHECK(phong(back, n, Vec3(-n), n) == Vec3::Constant(0.1));
}

TEST_CASE("colormap") {
  const auto first = colormap<Scalar>(-2, -2, 6), last = colormap<Scalar>(6, -2, 6);
  for (int i = 0; i < 3; ++i) {
    CHECK(first(i) == kColormapStops[0][static_cast<std::size_t>(i)]);
    CHECK(last(i) == kColormapStops[4][static_cast<std::size_t>(i)]);
  }
  const auto mid = colormap<Scalar>(0.125, 0, 1);
  for (int i = 0; i < 3; ++i)
    CHECK(mid(i) == doctest::Approx(0.5 * (kColormapStops[0][static_cast<std::size_t>(i)] +
                                           kColormapStops[1][static_cast<std::size_t>(i)])));
  CHECK(colormap<Scalar>(100, 0, 1) == last);
  CHECK_THROWS_AS(colormap<Scalar>(0, 1, 1), InvalidArgument);
}

TEST_CASE("depth mask") {
  const double inf = std::numeric_limits<double>::infinity();
  DepthGrid v(2, 2), r(2, 2);
  v << 0.5, inf, 0.1, 0.9;
  r.setConstant(inf);
  Mask m = depth_mask(v, r);
  CHECK(m(0, 0));
  CHECK(!m(0, 1));
  CHECK(m(1, 0));
  CHECK(!depth_mask(v, v).any());
  DepthGrid a(1, 1), b(1, 1);
  a << 2;
  b << 3;
  CHECK(depth_mask(a, b)(0, 0));
}

TEST_CASE("validation") {
  Camera<Scalar> c;
  c.z_near = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  ModelPose<Scalar> p;
  p.rotation(0, 0) = 2;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
}

TEST_CASE("tip vertex lands on the hand-computed pixel") {
  auto mesh = build_beam_mesh(10, 10, 40, 2, 2, 8);
  // camera on the beam axis above the tip, fov pi/2; tip corner (10, 10, 40) is
  // 60 in front with offset (10, 10): ndc (1/6, 1/6)
  const auto cam = axis_camera(100, std::numbers::pi / 2, 1, 1000);
  const auto p = project<Scalar>(mvp_matrix(cam, ModelPose<Scalar>{}), Vec3(10, 10, 40));
  CHECK(p.ndc.x() == doctest::Approx(1.0 / 6).epsilon(1e-15));
  CHECK(p.ndc.y() == doctest::Approx(1.0 / 6).epsilon(1e-15));
  // 120 x 120: x = (1/6 + 1) * 60 = 70, y = (1 - 1/6) * 60 = 50
  const Vec2 px = ndc_to_pixel(p.ndc.head<2>(), 120, 120);
  CHECK(px.x() == doctest::Approx(70));
  CHECK(px.y() == doctest::Approx(50));

  SurfaceView v;
  v.mesh = &mesh;
  v.positions = mesh.rest_positions;
  v.field.assign(static_cast<std::size_t>(mesh.node_count()), 0.0);
  RenderSettings s;
  s.width = s.height = 120;
  const Image img = render_surfaces(std::span(&v, 1), cam, s);
  auto is_bg = [&](int x, int y) {
    const auto* q = img.pixel(x, y);
    return q[0] == 255 && q[1] == 255 && q[2] == 255;
  };
  CHECK(!is_bg(69, 50));  // just inside the top face, left of the corner
  CHECK(is_bg(71, 48));   // just outside
  CHECK(!is_bg(65, 55));  // middle of the top face
}

TEST_CASE("rest frame golden image") {
  const Image img = golden_scene();
  const Image golden = from_ppm(io::read_text(testing::data_path("rest_frame.ppm")));
  REQUIRE(golden.width == img.width);
  REQUIRE(golden.height == img.height);
  int worst = 0;
  for (std::size_t k = 0; k < img.rgb.size(); ++k) worst = std::max(worst, std::abs(int(img.rgb[k]) - int(golden.rgb[k])));
  CHECK(worst <= 2);
  CHECK(from_ppm(to_ppm(img)).rgb == img.rgb);
}

}  // TEST_SUITE
