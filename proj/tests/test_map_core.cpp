#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "statstab/map_core.hpp"

using namespace statstab;
using Catch::Approx;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("eval on built-in families") {
  const auto d = make_doubling();
  CHECK(eval(d, 0.3) == Approx(0.6).margin(1e-15));
  CHECK(eval(d, 0.75) == Approx(0.5).margin(1e-15));

  const auto lz = make_lorenz_theta(0.75);
  CHECK(eval(lz, 0.5) == Approx(0.18920711500272107).margin(1e-15));
  // u = 1 is a branch endpoint, not a cut point: the right branch closure fixes it
  CHECK(eval(lz, 1.0 - 1e-13) == Approx(1.0).margin(1e-9));
  CHECK(eval(lz, -0.5) == Approx(-0.18920711500272107).margin(1e-15));

  const auto t = make_tent();
  CHECK(eval(t, 0.2) == Approx(0.4).margin(1e-15));
  CHECK(eval(t, 0.8) == Approx(0.4).margin(1e-15));

  CHECK_THROWS_AS(eval(d, 1.5), OutOfDomainError);
  CHECK_THROWS_AS(eval(d, 0.5), CutPointError);
}

TEST_CASE("derivative on built-in families") {
  const auto d = make_doubling();
  CHECK(derivative(d, 0.3) == Approx(2.0));
  const auto lz = make_lorenz_theta(0.75);
  CHECK(derivative(lz, 0.5) == Approx(1.7838106725040816).margin(1e-14));
  CHECK(derivative(lz, 1.0 - 1e-12) == Approx(1.5).margin(1e-9));
  // derivative blows up at the singular cut point
  CHECK(derivative(lz, 1e-10) > 1e2);
}

TEST_CASE("preimages: closed-form oracles") {
  const auto d = make_doubling();
  const auto pd = preimages(d, 0.5);
  REQUIRE(pd.size() == 2);
  CHECK(pd[0].x == Approx(0.25).margin(1e-12));
  CHECK(pd[1].x == Approx(0.75).margin(1e-12));
  CHECK(pd[0].abs_deriv == Approx(2.0));

  const auto lz = make_lorenz_theta(0.75);
  const auto pl = preimages(lz, 0.0);
  REQUIRE(pl.size() == 2);
  CHECK(pl[0].x == Approx(-0.39685026299204987).margin(1e-11));
  CHECK(pl[1].x == Approx(0.39685026299204987).margin(1e-11));

  const auto t = make_tent();
  const auto pt = preimages(t, 0.4);
  REQUIRE(pt.size() == 2);
  CHECK(pt[0].x == Approx(0.2).margin(1e-12));
  CHECK(pt[1].x == Approx(0.8).margin(1e-12));
}

TEST_CASE("preimage round-trip on 1000 random points per family") {
  std::mt19937_64 rng(11);
  for (const auto& map : {make_doubling(), make_tent(), make_lorenz_theta(0.75),
                          make_perturbed_doubling(0.01),
                          make_markov_pw_linear({2, 2, 4}, {0, 0.5, 0.75, 1})}) {
    std::uniform_real_distribution<double> unif(map.a(), map.b());
    int checked = 0;
    for (int i = 0; i < 1000; ++i) {
      const double x = unif(rng);
      if (map.is_cut_point(x)) continue;
      const double y = eval(map, x);
      bool found = false;
      for (const auto& p : preimages(map, y)) found = found || std::fabs(p.x - x) < 1e-9;
      CHECK(found);
      ++checked;
    }
    CHECK(checked > 990);
  }
}

TEST_CASE("uniform expansion of lorenz_theta") {
  const double theta = 0.75;
  const auto lz = make_lorenz_theta(theta);
  double min_deriv = 1e300;
  for (int i = 0; i < 4096; ++i) {
    const double u = -1.0 + 2.0 * (i + 0.5) / 4096.0;
    min_deriv = std::min(min_deriv, derivative(lz, u));
  }
  CHECK(min_deriv == Approx(2.0 * theta).margin(1e-3));  // attained in the limit |u| -> 1
  CHECK(min_deriv > 1.0);
  CHECK(derivative(lz, 1.0 - 1e-12) == Approx(2.0 * theta).margin(1e-9));
}

TEST_CASE("1/f' of lorenz_theta is Holder with exponent 1-theta") {
  const double theta = 0.75, alpha = 1.0 - theta;
  const auto lz = make_lorenz_theta(theta);
  double worst = 0.0;
  const int n = 512;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double u = (i + 0.5) / n, v = (j + 0.5) / n;  // one branch suffices by symmetry
      const double g = std::fabs(1.0 / derivative(lz, u) - 1.0 / derivative(lz, v));
      worst = std::max(worst, g / std::pow(v - u, alpha));
    }
  CHECK(worst <= 1.0 / (2.0 * theta) + 1e-6);
}

TEST_CASE("var_inverse_derivative oracles") {
  CHECK(var_inverse_derivative(make_doubling(), 1.0, 4096) == Approx(0.0).margin(1e-12));
  CHECK(var_inverse_derivative(make_tent(), 1.0, 4096) == Approx(0.0).margin(1e-12));
  // slopes (2,2,4): interior jump |1/2 - 1/4| = 1/4; value frozen from an
  // exhaustive sub-partition search at resolution 2^12
  const auto m = make_markov_pw_linear({2, 2, 4}, {0, 0.5, 0.75, 1});
  CHECK(var_inverse_derivative(m, 1.0, 4096) == Approx(0.25).margin(1e-12));
  // declared var_bound of lorenz_theta dominates the estimate
  const auto lz = make_lorenz_theta(0.75);
  const double est = var_inverse_derivative(lz, lz.alpha(), 4096);
  CHECK(est <= lz.var_bound() + 1e-9);
  CHECK(lz.var_bound() == Approx(std::pow(2.0, 0.25) / 1.5).margin(1e-12));
}

TEST_CASE("var_inverse_derivative is nondecreasing in resolution") {
  const auto lz = make_lorenz_theta(0.6);
  double prev = 0.0;
  for (int res : {64, 256, 1024, 4096}) {
    const double v = var_inverse_derivative(lz, lz.alpha(), res);
    CHECK(v >= prev - 1e-12);
    prev = v;
  }
}

TEST_CASE("map_distance_upper oracles") {
  const auto d = make_doubling();
  const Diffeo id{[](double x) { return x; }, [](double) { return 1.0; }};
  CHECK(map_distance_upper(d, d, id, {{0.0, 1.0}}) == Approx(0.0).margin(1e-12));

  const double eps = 0.01;
  const auto pd = make_perturbed_doubling(eps);
  const Diffeo sigma{[eps](double x) { return x + 0.5 * eps * std::sin(2.0 * kPi * x); },
                     [eps](double x) { return 1.0 + kPi * eps * std::cos(2.0 * kPi * x); }};
  const double d_hat = map_distance_upper(d, pd, sigma, {{0.0, 1.0}});
  // sup |1/sigma' - 1| = pi eps / (1 - pi eps), attained at x = 1/2
  CHECK(d_hat == Approx(0.032434898938137742).epsilon(1e-5));

  // exchanging (f1, sigma) with (f2, sigma^{-1}) gives the same bound up to
  // estimator tolerance
  const Diffeo sigma_inv{
      [&sigma](double y) {
        return detail::invert_monotone(sigma.forward, sigma.derivative, 0.0, 1.0, y, 1);
      },
      [&sigma](double y) {
        const double x =
            detail::invert_monotone(sigma.forward, sigma.derivative, 0.0, 1.0, y, 1);
        return 1.0 / sigma.derivative(x);
      }};
  const double d_hat_rev = map_distance_upper(pd, d, sigma_inv, {{0.0, 1.0}});
  CHECK(d_hat_rev == Approx(d_hat).epsilon(5e-2));

  CHECK_THROWS_AS(map_distance_upper(d, make_tent(), id, {{0.0, 1.0}}), ConjugacyViolation);
}

TEST_CASE("map_distance_upper: lorenz_theta branch conjugacy") {
  const auto f1 = make_lorenz_theta(0.75);
  const auto f2 = make_lorenz_theta(0.80);
  const double s = 0.80 / 0.75;  // f1(sgn(u)|u|^s) = f2(u)
  const Diffeo sigma{[s](double u) { return u >= 0 ? std::pow(u, s) : -std::pow(-u, s); },
                     [s](double u) { return s * std::pow(std::fabs(u), s - 1.0); }};
  const double d_hat = map_distance_upper(f1, f2, sigma, {{-1.0, 1.0}});
  CHECK(d_hat > 0.0);
  CHECK(std::isfinite(d_hat));
}

TEST_CASE("family invariants and parameter validation") {
  CHECK_THROWS_AS(make_lorenz_theta(0.5), BadParameters);
  CHECK_THROWS_AS(make_lorenz_theta(1.0), BadParameters);
  CHECK_THROWS_AS(make_perturbed_doubling(0.2), BadParameters);  // slope would dip below 1
  for (const auto& map : {make_doubling(), make_tent(), make_lorenz_theta(0.75)}) {
    CHECK(map.beta() > 1.0);
    double inf_deriv = 1e300;
    for (int i = 0; i < 2048; ++i) {
      const double x = map.a() + map.length() * (i + 0.5) / 2048.0;
      if (map.is_cut_point(x)) continue;
      inf_deriv = std::min(inf_deriv, std::fabs(derivative(map, x)));
    }
    CHECK(inf_deriv >= map.beta() - 1e-9);
  }
}

TEST_CASE("JSON round-trip of map descriptors") {
  for (const auto& map : {make_doubling(), make_perturbed_doubling(0.02), make_tent(),
                          make_lorenz_theta(0.6),
                          make_markov_pw_linear({2, 2, 4}, {0, 0.5, 0.75, 1})}) {
    const auto again = map_from_json(map_descriptor(map));
    CHECK(again.family() == map.family());
    CHECK(again.a() == map.a());
    CHECK(again.b() == map.b());
    for (int i = 0; i < 100; ++i) {
      const double x = map.a() + map.length() * (i + 0.5) / 100.0;
      if (map.is_cut_point(x)) continue;
      CHECK(eval(again, x) == Approx(eval(map, x)).margin(1e-12));
    }
  }
}

TEST_CASE("iterated-map helpers") {
  const auto d = make_doubling();
  const auto cuts2 = cut_points_of_iterate(d, 2);
  REQUIRE(cuts2.size() == 5);  // 0, 1/4, 1/2, 3/4, 1
  CHECK(cuts2[1] == Approx(0.25).margin(1e-10));
  CHECK(min_branch_length_of_iterate(d, 2) == Approx(0.25).margin(1e-10));

  const auto d2 = compose_map(d, 2);
  CHECK(eval(d2, 0.1) == Approx(0.4).margin(1e-10));
  CHECK(eval(d2, 0.3) == Approx(0.2).margin(1e-10));
  CHECK(derivative(d2, 0.1) == Approx(4.0).margin(1e-9));
}
