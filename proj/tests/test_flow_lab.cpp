#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "statstab/flow_lab.hpp"
#include "statstab/transfer.hpp"

using namespace statstab;
using Catch::Approx;

namespace {

FlowSystem saddle(double l1 = 2.0, double l2 = -1.0, double l3 = -3.0) {
  FlowSystem s;
  s.kind = FlowKind::linear_saddle;
  s.l1 = l1;
  s.l2 = l2;
  s.l3 = l3;
  return s;
}

}  // namespace

TEST_CASE("integrate: linear saddle closed form") {
  const auto tr = integrate(saddle(), {0.1, 1.0, 1.0}, 1.0);
  const auto e = tr.endpoint();
  CHECK(e[0] == Approx(0.1 * std::exp(2.0)).margin(1e-6));
  CHECK(e[1] == Approx(std::exp(-1.0)).margin(1e-6));
  CHECK(e[2] == Approx(std::exp(-3.0)).margin(1e-6));
}

TEST_CASE("integrate: equilibrium stays put and tolerances self-converge") {
  FlowSystem l63;
  auto e = integrate(l63, {0.0, 0.0, 0.0}, 5.0).endpoint();
  CHECK(std::fabs(e[0]) + std::fabs(e[1]) + std::fabs(e[2]) < 1e-9);

  const auto e1 = integrate(l63, {1.0, 1.0, 1.0}, 1.0).endpoint();
  IntegratorControls tight;
  tight.rel_tol = 0.5e-9;
  tight.abs_tol = 0.5e-12;
  const auto e2 = integrate(l63, {1.0, 1.0, 1.0}, 1.0, tight).endpoint();
  for (int i = 0; i < 3; ++i) CHECK(e1[i] == Approx(e2[i]).margin(1e-6));
}

TEST_CASE("lorenz_like_check at the Lorenz origin") {
  FlowSystem l63;
  const auto chk = lorenz_like_check(l63, {0.0, 0.0, 0.0});
  CHECK(chk.eigenvalues[0] == Approx(11.8277234511634563).margin(1e-9));
  CHECK(chk.eigenvalues[1] == Approx(-8.0 / 3.0).margin(1e-9));
  CHECK(chk.eigenvalues[2] == Approx(-22.8277234511634563).margin(1e-9));
  CHECK(chk.is_lorenz_like);
  CHECK(chk.eigenvalues[0] + chk.eigenvalues[1] > 0.0);

  CHECK_THROWS_AS(lorenz_like_check(l63, {1.0, 1.0, 1.0}), NotEquilibrium);
}

TEST_CASE("lorenz_like_check on explicit saddles") {
  auto chk = lorenz_like_check(saddle(2, -1, -3), {0, 0, 0});
  CHECK(chk.is_lorenz_like);
  chk = lorenz_like_check(saddle(1, -2, -3), {0, 0, 0});
  CHECK_FALSE(chk.is_lorenz_like);  // l1 + l2 = -1
}

TEST_CASE("passage time: formula and integrator agree") {
  const auto s = saddle();
  CHECK(passage_time(s, 0.1) == Approx(1.1512925464970228).margin(1e-15));
  CHECK(passage_time(s, 0.999999) == Approx(0.0).margin(1e-5));
  CHECK_THROWS_AS(passage_time(s, 0.0), OnStableManifold);

  for (double x : {1e-6, 1e-3, 0.1, 0.5, 0.9})
    CHECK(passage_time_integrated(s, x) == Approx(passage_time(s, x)).margin(1e-8));

  const auto fast = saddle(11.8277234511634563, -2.6667, -22.8277);
  CHECK(passage_time(fast, 1e-6) == Approx(1.168).margin(1e-3));
  CHECK(passage_time_integrated(fast, 1e-6) == Approx(passage_time(fast, 1e-6)).margin(1e-8));
}

TEST_CASE("poincare return on lorenz63 z = 27") {
  FlowSystem l63;
  CrossSection sec;  // defaults: plane z = 27, downward crossings
  const auto x = integrate(l63, {1.0, 1.0, 20.0}, 30.0).endpoint();
  auto [u0, v0] = sec.to_uv(x);
  REQUIRE(sec.in_bounds(u0, v0));
  const auto rec = poincare_return(l63, sec, u0, v0, 0.0);
  CHECK(rec.tau > 0.0);
  CHECK(sec.in_bounds(rec.u_hit, rec.v_hit));
  CHECK(std::fabs(sec.plane_offset(rec.hit3d)) < 1e-6);

  // repeated returns stay on the section and delta-adapted for the shipped bounds
  double u = rec.u_hit, v = rec.v_hit;
  for (int i = 0; i < 10; ++i) {
    const auto r = poincare_return(l63, sec, u, v, 0.0);
    CHECK(std::fabs(sec.plane_offset(r.hit3d)) < 1e-6);
    CHECK(sec.delta_adapted(r.u_hit, r.v_hit));
    u = r.u_hit;
    v = r.v_hit;
  }
}

TEST_CASE("no recurrence gives NoReturn") {
  CrossSection sec;
  sec.point = {0.0, 0.0, 1.0};
  sec.direction = +1;
  CHECK_THROWS_AS(poincare_return(saddle(), sec, 0.1, 0.1, 0.0, 50.0), NoReturn);
}

TEST_CASE("geometric Lorenz map oracles") {
  const GeometricLorenzMap P(0.75, 0.3, 2.0);
  const auto [px, py] = P.apply(0.5, 0.0);
  CHECK(px == Approx(0.18920711500272107).margin(1e-15));
  CHECK(py == Approx(0.7).margin(1e-15));

  // fiber bound on the positive half-square
  for (double y : {-1.0, 0.0, 1.0})
    for (double x : {0.1, 0.5, 0.9}) {
      const auto [qx, qy] = P.apply(x, y);
      CHECK(qy >= 1.0 - 2.0 * P.B - 1e-12);
      CHECK(qy <= 1.0 + 1e-12);
    }

  // foliation invariance: first coordinate independent of y
  CHECK(P.apply(0.3, -0.8).first == P.apply(0.3, 0.9).first);

  CHECK_THROWS_AS(GeometricLorenzMap(0.4, 0.3, 2.0), BadParameters);
  CHECK_THROWS_AS(GeometricLorenzMap(0.75, 1.5, 2.0), BadParameters);
  CHECK_THROWS_AS(GeometricLorenzMap(0.75, 0.3, 0.5), BadParameters);
}

TEST_CASE("collapse_foliation of the geometric model is exact") {
  const GeometricLorenzMap P(0.75, 0.3, 2.0);
  const auto f = collapse_foliation(P);
  for (int i = 0; i < 4096; ++i) {
    const double x = -1.0 + 2.0 * (i + 0.5) / 4096.0;
    if (f.is_cut_point(x)) continue;
    CHECK(std::fabs(eval(f, x) - P.base(x)) <= 1e-12);
  }
  CHECK(semiconjugacy_residual(P, f, 10000) < 1e-9);
}

TEST_CASE("stable direction of the saddle flow") {
  const Eigen::Vector3d v = stable_direction(saddle(), {0.5, 0.5, 0.5}, 3.0);
  // most contracted direction is the l3 axis
  CHECK(std::fabs(v[2]) == Approx(1.0).margin(1e-6));
}

TEST_CASE("return-time integral oracles") {
  // linear saddle, l1 = 2, symmetric section model on [-1/2, 1/2]
  auto est = return_time_integral(saddle(), 100000, 7);
  CHECK(est.converged);
  CHECK(est.estimate == Approx(0.84657359027997265).epsilon(0.02));
  CHECK(est.near_leaf_slope == Approx(0.5).epsilon(0.05));

  // constant tau
  est = return_time_integral_mc([](double) { return 3.0; }, 1.0, 10000, 5);
  CHECK(est.converged);
  CHECK(est.estimate == Approx(3.0).margin(1e-6));

  // calibrated geometric model
  FlowSystem geo;
  geo.kind = FlowKind::geometric_lorenz;
  auto estg = return_time_integral(geo, 100000, 11);
  CHECK(estg.converged);
  CHECK(estg.near_leaf_slope == Approx(1.0 / geo.lambda1).epsilon(0.05));
  CHECK(std::isfinite(estg.estimate));

  FlowSystem l63;
  CHECK_THROWS_AS(return_time_integral(l63, 10000, 1), BadParameters);
}
