#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "statstab/transfer.hpp"

using namespace statstab;
using Catch::Approx;

namespace {

constexpr double kPi = 3.14159265358979323846;

GridFunction random_smooth(double a, double b, std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::array<double, 5> amp{}, phase{};
  for (int m = 0; m < 5; ++m) {
    amp[m] = unif(rng);
    phase[m] = kPi * unif(rng);
  }
  return GridFunction::sample(a, b, n, [&](double x) {
    double s = 0.4;
    const double t = (x - a) / (b - a);
    for (int m = 0; m < 5; ++m) s += amp[m] * std::sin(2.0 * kPi * (m + 1) * t + phase[m]);
    return s;
  });
}

}  // namespace

TEST_CASE("apply_transfer oracles") {
  const auto d = make_doubling();
  const auto one = GridFunction::constant(0, 1, 1024, 1.0);
  auto Tg = apply_transfer(d, one);
  for (std::size_t i = 0; i < Tg.n_cells(); i += 97) CHECK(Tg[i] == Approx(1.0).margin(1e-10));

  const auto ind = GridFunction::indicator(0, 1, 1024, 0.0, 0.5);
  Tg = apply_transfer(d, ind);
  for (std::size_t i = 0; i < Tg.n_cells(); i += 97) CHECK(Tg[i] == Approx(0.5).margin(1e-10));

  Tg = apply_transfer(make_tent(), one);
  for (std::size_t i = 0; i < Tg.n_cells(); i += 97) CHECK(Tg[i] == Approx(1.0).margin(1e-10));
}

TEST_CASE("transfer positivity, contraction, mass conservation") {
  std::mt19937_64 rng(23);
  for (const auto& map : {make_doubling(), make_tent(), make_lorenz_theta(0.75),
                          make_markov_pw_linear({2, 2, 4}, {0, 0.5, 0.75, 1})}) {
    const TransferApplier T(map, 4096);
    for (int trial = 0; trial < 30; ++trial) {
      auto g = random_smooth(map.a(), map.b(), 4096, rng);
      const auto Tg = T.apply(g);
      CHECK(std::fabs(Tg.integral() - g.integral()) <= 1e-6 * g.l1_norm());
      CHECK(Tg.l1_norm() <= g.l1_norm() + 1e-9);
      GridFunction pos = g;
      for (auto& v : pos.values()) v = std::fabs(v);
      const auto Tpos = T.apply(pos);
      double mn = 1e300;
      for (std::size_t i = 0; i < Tpos.n_cells(); ++i) mn = std::min(mn, Tpos[i]);
      CHECK(mn >= 0.0);
    }
  }
}

TEST_CASE("T^k of f equals T of f^k") {
  std::mt19937_64 rng(29);
  const auto d = make_doubling();
  for (int k = 1; k <= 3; ++k) {
    const auto dk = compose_map(d, k);
    const TransferApplier T(d, 2048), Tk(dk, 2048);
    for (int trial = 0; trial < 5; ++trial) {
      const auto g = random_smooth(0, 1, 2048, rng);
      GridFunction lhs = g;
      for (int j = 0; j < k; ++j) lhs = T.apply(lhs);
      const GridFunction rhs = Tk.apply(g);
      CHECK(l1_distance(lhs, rhs) <= 1e-6);
    }
  }
}

TEST_CASE("variation propagation under iteration") {
  for (const auto& map : {make_doubling(), make_tent(), make_lorenz_theta(0.75),
                          make_markov_pw_linear({2, 2, 4}, {0, 0.5, 0.75, 1})}) {
    const double v1 = var_inverse_derivative(map, map.alpha(), 2048);
    for (int k = 2; k <= 4; ++k) {
      const auto mk = compose_map(map, k);
      const double vk = var_inverse_derivative(mk, map.alpha(), 2048);
      const double bound = k / std::pow(map.beta(), k - 1) * v1;
      CHECK(vk <= bound + 1e-6 + 1e-3 * bound);
    }
  }
}

TEST_CASE("Ulam rows: doubling and tent oracles") {
  const auto U = ulam_discretize(make_doubling(), 4);
  CHECK(U.entry(0, 0) == Approx(0.5).margin(1e-12));
  CHECK(U.entry(0, 1) == Approx(0.5).margin(1e-12));
  CHECK(U.entry(0, 2) == Approx(0.0).margin(1e-12));
  CHECK(U.entry(0, 3) == Approx(0.0).margin(1e-12));
  CHECK(U.entry(2, 0) == Approx(0.5).margin(1e-12));
  CHECK(U.entry(2, 1) == Approx(0.5).margin(1e-12));

  const auto Ut = ulam_discretize(make_tent(), 2);
  CHECK(Ut.entry(0, 0) == Approx(0.5).margin(1e-12));
  CHECK(Ut.entry(0, 1) == Approx(0.5).margin(1e-12));
  CHECK(Ut.entry(1, 0) == Approx(0.5).margin(1e-12));
  CHECK(Ut.entry(1, 1) == Approx(0.5).margin(1e-12));
}

TEST_CASE("Ulam row sums are 1 for every family") {
  for (const auto& map : {make_doubling(), make_tent(), make_lorenz_theta(0.75),
                          make_perturbed_doubling(0.01),
                          make_markov_pw_linear({2, 2, 4}, {0, 0.5, 0.75, 1})}) {
    const auto U = ulam_discretize(map, 256);
    for (std::size_t i = 0; i < 256; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < 256; ++j) s += U.entry(i, j);
      CHECK(s == Approx(1.0).margin(1e-10));
    }
  }
}

TEST_CASE("invariant densities: analytic and Markov oracles") {
  auto h = invariant_density(make_doubling(), 1024);
  CHECK(l1_distance(h, GridFunction::constant(0, 1, 1024, 1.0)) <= 1e-6);
  CHECK(h.integral() == Approx(1.0).margin(1e-12));

  h = invariant_density(make_tent(), 1024);
  CHECK(l1_distance(h, GridFunction::constant(0, 1, 1024, 1.0)) <= 1e-6);

  h = invariant_density(make_markov_pw_linear({2, 2, 4}, {0, 0.5, 0.75, 1}), 1024);
  const auto profile = GridFunction::sample(0, 1, 1024,
                                            [](double x) { return x < 0.5 ? 1.2 : 0.8; });
  CHECK(l1_distance(h, profile) <= 2e-3);
}

TEST_CASE("invariant density is independent of the start (ergodicity proxy)") {
  const auto map = make_lorenz_theta(0.75);
  const auto h = invariant_density(map, 512);
  // push a few random nonnegative starts through the Ulam chain directly
  const auto U = ulam_discretize(map, 512);
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> unif(0.1, 1.0);
  for (int trial = 0; trial < 4; ++trial) {
    std::vector<double> p(512);
    double mass = 0.0;
    for (auto& v : p) {
      v = unif(rng);
      mass += v;
    }
    for (auto& v : p) v /= mass;
    for (int step = 0; step < 4000; ++step) p = U.pushforward(p);
    const double w = map.length() / 512.0;
    GridFunction hp(map.a(), map.b(), [&] {
      std::vector<double> vals(512);
      for (std::size_t i = 0; i < 512; ++i) vals[i] = p[i] / w;
      return vals;
    }());
    CHECK(l1_distance(hp, h) <= 1e-6);
  }
}

TEST_CASE("Lasota-Yorke constants: doubling oracle") {
  const auto ly = ly_constants(make_doubling(), 1.0, 0.05, 2);
  CHECK(ly.k == 2);
  CHECK(ly.c1 == Approx(1.0));
  CHECK(ly.c2 == Approx(8.0));
  CHECK(ly.lambda_hat == Approx(0.5));
  CHECK(ly.lambda == Approx(std::sqrt(0.5)));
  CHECK(ly.c3 == Approx(4.0));
  CHECK(ly.c5 == Approx(16.0));
  CHECK(ly.c4 == Approx(56.0));
  CHECK(ly.i_m == Approx(0.5));
  CHECK(ly.i_mk == Approx(0.25));
}

TEST_CASE("Lasota-Yorke constants: degenerate and infeasible cases") {
  // c = 0, alpha = 1: c1 = 2/beta
  const auto ly = ly_constants(make_tent(), 1.0, 0.05, 1);
  CHECK(ly.c1 == Approx(2.0 / make_tent().beta()));
  // beta too close to 1 for any k <= 64
  Branch slow{0.0, 1.0, [](double x) { return std::fmod(1.001 * x, 1.0); },
              [](double) { return 1.001; }, 1};
  const PiecewiseExpandingMap lazy(0.0, 1.0, {slow}, 1.001, 1.0, 0.0, "custom", {});
  CHECK_THROWS_AS(ly_constants(lazy, 1.0, 0.05, 1), NoContractingK);
}

TEST_CASE("verify_ly on doubling") {
  const auto d = make_doubling();
  const auto ly = ly_constants(d, 1.0, 0.05, 2);
  auto rep = verify_ly(d, ly, GridFunction::constant(0, 1, 512, 1.0), 8);
  CHECK(rep.all_hold);
  for (const auto& row : rep.rows) CHECK(row.lhs == Approx(1.0).margin(1e-9));

  rep = verify_ly(d, ly, GridFunction::constant(0, 1, 512, 0.0), 4);
  CHECK(rep.all_hold);
  for (const auto& row : rep.rows) {
    CHECK(row.lhs == 0.0);
    CHECK(row.rhs == 0.0);
  }

  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 10; ++trial)
    CHECK(verify_ly(d, ly, random_smooth(0, 1, 512, rng), 10).all_hold);
}

TEST_CASE("operator distance and density stability") {
  const auto d = make_doubling();
  const auto dict = build_dictionary(0, 1, 2048);
  const BVParams params = BVParams::defaults(0, 1, 2048, 1.0);

  auto est = operator_distance(d, d, dict, 0.0, params);
  CHECK(est.op_distance_lower == Approx(0.0).margin(1e-12));

  double prev_lower = 1e300, prev_gap = 1e300;
  for (double eps : {0.04, 0.02, 0.01}) {
    const auto pd = make_perturbed_doubling(eps);
    const Diffeo sigma{[eps](double x) { return x + 0.5 * eps * std::sin(2.0 * kPi * x); },
                       [eps](double x) { return 1.0 + kPi * eps * std::cos(2.0 * kPi * x); }};
    const double d_hat = map_distance_upper(d, pd, sigma, {{0.0, 1.0}});
    est = operator_distance(d, pd, dict, d_hat, params);
    CHECK(est.op_distance_lower > 0.0);
    CHECK(est.lower_le_upper);
    CHECK(est.op_distance_lower < prev_lower);
    const double ratio = prev_lower / est.op_distance_lower;
    if (prev_lower < 1e300) CHECK((ratio >= 1.5 && ratio <= 2.5));
    prev_lower = est.op_distance_lower;

    const double gap = density_stability(d, pd, 2048);
    CHECK(gap < prev_gap);
    prev_gap = gap;
  }

  CHECK(density_stability(d, d, 2048) <= 1e-9);
}
