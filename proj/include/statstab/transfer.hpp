#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "statstab/bv_norms.hpp"
#include "statstab/errors.hpp"
#include "statstab/grid_function.hpp"
#include "statstab/map_core.hpp"

namespace statstab {

/// Row-stochastic Ulam matrix, sparse rows: entry (i,j) = |I_i ∩ f^{-1}(I_j)| / |I_i|,
/// computed branchwise by analytic inversion of cell edges (the per-branch
/// inverse points telescope, so each row sums to 1 exactly up to rounding).
class UlamOperator {
 public:
  UlamOperator(const PiecewiseExpandingMap& map, std::size_t n_cells)
      : a_(map.a()), b_(map.b()), n_(n_cells), rows_(n_cells) {
    const double w = (b_ - a_) / static_cast<double>(n_);
    for (const auto& br : map.branches()) {
      const auto i0 = static_cast<std::size_t>(std::floor((br.lo - a_) / w + 1e-12));
      const auto i1 = static_cast<std::size_t>(std::ceil((br.hi - a_) / w - 1e-12));
      for (std::size_t i = i0; i < i1 && i < n_; ++i) {
        const double u0 = std::max(br.lo, a_ + static_cast<double>(i) * w);
        const double u1 = std::min(br.hi, a_ + static_cast<double>(i + 1) * w);
        if (u1 - u0 <= 0.0) continue;
        double y0 = br.forward(u0), y1 = br.forward(u1);
        const bool flip = y0 > y1;
        if (flip) std::swap(y0, y1);
        auto j0 = static_cast<long>(std::floor((y0 - a_) / w));
        auto j1 = static_cast<long>(std::floor((y1 - a_) / w));
        j0 = std::clamp<long>(j0, 0, static_cast<long>(n_) - 1);
        j1 = std::clamp<long>(j1, 0, static_cast<long>(n_) - 1);
        double prev = flip ? u1 : u0;  // inverse points in increasing-y order
        for (long j = j0; j <= j1; ++j) {
          double next;
          if (j == j1) {
            next = flip ? u0 : u1;
          } else {
            const double edge = a_ + static_cast<double>(j + 1) * w;
            next = detail::invert_monotone(br.forward, br.derivative, u0, u1, edge,
                                           br.orientation);
          }
          const double len = std::fabs(next - prev);
          if (len > 0.0) add(i, static_cast<std::size_t>(j), len / w);
          prev = next;
        }
      }
    }
    for (std::size_t i = 0; i < n_; ++i) {
      double s = 0.0;
      for (const auto& [j, v] : rows_[i]) s += v;
      if (std::fabs(s - 1.0) > 1e-10)
        throw DegenerateCell("Ulam row " + std::to_string(i) + " sums to " + std::to_string(s));
    }
  }

  std::size_t n_cells() const { return n_; }
  const std::vector<std::vector<std::pair<std::size_t, double>>>& rows() const { return rows_; }

  /// p' = p U (probability-vector pushforward).
  std::vector<double> pushforward(const std::vector<double>& p) const {
    std::vector<double> q(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i)
      for (const auto& [j, v] : rows_[i]) q[j] += p[i] * v;
    return q;
  }

  double entry(std::size_t i, std::size_t j) const {
    for (const auto& [jj, v] : rows_[i])
      if (jj == j) return v;
    return 0.0;
  }

 private:
  void add(std::size_t i, std::size_t j, double v) {
    for (auto& [jj, vv] : rows_[i])
      if (jj == j) {
        vv += v;
        return;
      }
    rows_[i].emplace_back(j, v);
  }

  double a_, b_;
  std::size_t n_;
  std::vector<std::vector<std::pair<std::size_t, double>>> rows_;
};

inline UlamOperator ulam_discretize(const PiecewiseExpandingMap& map, std::size_t n_cells) {
  return UlamOperator(map, n_cells);
}

/// Cached transfer-operator action for one (map, grid) pair. apply() returns
/// the exact cell averages of T g for the piecewise-constant representative:
/// avg_j(T g) = (1/|I_j|) ∫_{f^{-1}(I_j)} g = sum_i U_ij g_i for uniform cells,
/// so mass transport, positivity, and L1 contraction are exact to rounding
/// (raw midpoint evaluation of the preimage sum aliases the cell lookup and
/// loses mass at O(cell width)).
class TransferApplier {
 public:
  TransferApplier(const PiecewiseExpandingMap& map, std::size_t n_cells)
      : U_(map, n_cells) {}

  GridFunction apply(const GridFunction& g) const {
    const auto out = U_.pushforward(g.values());
    return GridFunction(g.a(), g.b(), out);
  }

 private:
  UlamOperator U_;
};

/// (T g)(x) = sum_{f(y)=x} g(y)/|f'(y)|, represented by its exact cell averages.
inline GridFunction apply_transfer(const PiecewiseExpandingMap& map, const GridFunction& g) {
  return TransferApplier(map, g.n_cells()).apply(g);
}

/// Fixed density of the Ulam operator by power iteration from the flat start,
/// with Cesaro averaging every 64 steps to damp rotational spectrum.
/// Residual criterion: ||U^T h - h||_1 <= 1e-10 (probability-vector l1).
inline GridFunction invariant_density(const PiecewiseExpandingMap& map, std::size_t n_cells,
                                      double residual_tol = 1e-10, int max_steps = 100000) {
  const UlamOperator U = ulam_discretize(map, n_cells);
  const double w = map.length() / static_cast<double>(n_cells);
  std::vector<double> p(n_cells, 1.0 / static_cast<double>(n_cells));
  std::vector<double> avg(n_cells, 0.0);
  int in_window = 0;
  for (int step = 1; step <= max_steps; ++step) {
    std::vector<double> q = U.pushforward(p);
    double res = 0.0;
    for (std::size_t j = 0; j < n_cells; ++j) res += std::fabs(q[j] - p[j]);
    for (std::size_t j = 0; j < n_cells; ++j) avg[j] += q[j];
    ++in_window;
    p = std::move(q);
    if (res <= residual_tol) {
      std::vector<double> h(n_cells);
      double mass = 0.0;
      for (std::size_t j = 0; j < n_cells; ++j) mass += p[j];
      for (std::size_t j = 0; j < n_cells; ++j) h[j] = p[j] / (mass * w);
      return GridFunction(map.a(), map.b(), std::move(h));
    }
    if (in_window == 64) {
      double s = 0.0;
      for (double v : avg) s += v;
      for (std::size_t j = 0; j < n_cells; ++j) p[j] = avg[j] / s;
      std::fill(avg.begin(), avg.end(), 0.0);
      in_window = 0;
    }
  }
  throw NoConvergence("invariant_density: power iteration residual not reached");
}

/// Explicit Lasota-Yorke constants assembled from (alpha, eps0, beta, c, k).
struct LYConstants {
  double alpha = 1.0, eps0 = 0.05, beta = 2.0, c = 0.0;
  int k = 1;
  double c1 = 0.0, c2 = 0.0;
  double lambda_hat = 0.0, lambda = 0.0;
  double c3 = 0.0, c4 = 0.0, c5 = 0.0;
  double i_m = 0.0, i_mk = 0.0;
};

inline nlohmann::json to_json(const LYConstants& ly) {
  return {{"alpha", ly.alpha}, {"eps0", ly.eps0},   {"beta", ly.beta}, {"c", ly.c},
          {"k", ly.k},         {"c1", ly.c1},       {"c2", ly.c2},     {"lambda_hat", ly.lambda_hat},
          {"lambda", ly.lambda}, {"c3", ly.c3},     {"c4", ly.c4},     {"c5", ly.c5},
          {"i_m", ly.i_m},     {"i_mk", ly.i_mk},
          {"c4_is_upper_bound", true}};
}

/// c1 = 2 beta^{-alpha} + 5c/eps0, c2 = 5c + 4 eps0^{1-alpha}/|I_m|,
/// lambda_hat = 2 beta^{-k alpha} + 5kc/(eps0 beta^{k-1}), lambda = lambda_hat^{1/k},
/// c5 = 5kc/beta^{k-1} + 4 eps0^{1-alpha}/|I_{m,k}|,
/// c3 = lambda_hat^{-k} c1^k, c4 <= c2 (c1^{k+1}-1)/(c1-1) + c5/(1-lambda_hat).
/// k auto-increments to the smallest value with lambda_hat < 1.
inline LYConstants ly_constants(const PiecewiseExpandingMap& map, double alpha, double eps0,
                                int k) {
  LYConstants ly;
  ly.alpha = alpha;
  ly.eps0 = eps0;
  ly.beta = map.beta();
  ly.c = map.var_bound();
  ly.i_m = map.min_branch_length();
  auto lambda_hat_of = [&](int kk) {
    return 2.0 * std::pow(ly.beta, -kk * alpha) +
           5.0 * kk * ly.c / (eps0 * std::pow(ly.beta, kk - 1));
  };
  k = std::max(k, 1);
  while (k <= 64 && lambda_hat_of(k) >= 1.0) ++k;
  if (k > 64) throw NoContractingK("no k <= 64 gives lambda_hat < 1");
  ly.k = k;
  ly.c1 = 2.0 * std::pow(ly.beta, -alpha) + 5.0 * ly.c / eps0;
  ly.c2 = 5.0 * ly.c + 4.0 * std::pow(eps0, 1.0 - alpha) / ly.i_m;
  ly.lambda_hat = lambda_hat_of(k);
  ly.lambda = std::pow(ly.lambda_hat, 1.0 / k);
  ly.i_mk = k == 1 ? ly.i_m : min_branch_length_of_iterate(map, k);
  ly.c5 = 5.0 * k * ly.c / std::pow(ly.beta, k - 1) +
          4.0 * std::pow(eps0, 1.0 - alpha) / ly.i_mk;
  ly.c3 = std::pow(ly.lambda_hat, -k) * std::pow(ly.c1, k);
  const double geom = std::fabs(ly.c1 - 1.0) < 1e-12
                          ? static_cast<double>(k + 1)
                          : (std::pow(ly.c1, k + 1) - 1.0) / (ly.c1 - 1.0);
  ly.c4 = ly.c2 * geom + ly.c5 / (1.0 - ly.lambda_hat);
  return ly;
}

struct LYRow {
  int n = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

struct LYReport {
  std::vector<LYRow> rows;        // ||T^n g|| <= c3 lambda^n ||g|| + c4 ||g||_1
  LYRow k_step;                   // ||T^k g|| <= lambda_hat ||g|| + c5 ||g||_1
  bool all_hold = true;
};

inline LYReport verify_ly(const PiecewiseExpandingMap& map, const LYConstants& ly,
                          const GridFunction& g, int n_max) {
  BVParams params = BVParams::defaults(map.a(), map.b(), g.n_cells(), ly.alpha);
  params.eps0 = ly.eps0;
  const double norm_g = norm_alpha_1(g, params);
  const double l1_g = g.l1_norm();
  LYReport rep;
  const TransferApplier T(map, g.n_cells());
  GridFunction cur = g;
  for (int n = 1; n <= n_max; ++n) {
    cur = T.apply(cur);
    LYRow row;
    row.n = n;
    row.lhs = norm_alpha_1(cur, params);
    row.rhs = ly.c3 * std::pow(ly.lambda, n) * norm_g + ly.c4 * l1_g;
    row.holds = row.lhs <= row.rhs + 1e-9 + g.width();
    rep.all_hold = rep.all_hold && row.holds;
    rep.rows.push_back(row);
    if (n == ly.k) {
      rep.k_step = {n, row.lhs, ly.lambda_hat * norm_g + ly.c5 * l1_g, false};
      rep.k_step.holds = rep.k_step.lhs <= rep.k_step.rhs + 1e-9 + g.width();
      rep.all_hold = rep.all_hold && rep.k_step.holds;
    }
  }
  return rep;
}

struct StabilityEstimate {
  double eps = 0.0;                // certified map-distance bound d_hat
  double op_distance_lower = 0.0;  // dictionary estimate of |||T_eps - T_0|||
  double op_distance_upper = 0.0;  // (2 + 4C) d_hat^alpha
  double density_gap = 0.0;        // ||h_eps - h_0||_1 (filled by callers)
  bool lower_le_upper = true;
};

/// Fixed, versioned dictionary of norm-one test functions ("dict-v1"):
/// 16 level-4 dyadic indicators, 16 Fourier pairs, 8 sawtooths, 8 monomials.
inline std::vector<GridFunction> build_dictionary(double a, double b, std::size_t n_cells) {
  constexpr double pi = 3.14159265358979323846;
  std::vector<GridFunction> dict;
  const double len = b - a;
  for (int j = 0; j < 16; ++j)
    dict.push_back(GridFunction::indicator(a, b, n_cells, a + j * len / 16.0,
                                           a + (j + 1) * len / 16.0));
  for (int m = 1; m <= 16; ++m) {
    dict.push_back(GridFunction::sample(
        a, b, n_cells, [=](double x) { return std::sin(2.0 * pi * m * (x - a) / len); }));
    dict.push_back(GridFunction::sample(
        a, b, n_cells, [=](double x) { return std::cos(2.0 * pi * m * (x - a) / len); }));
  }
  for (int m = 1; m <= 8; ++m)
    dict.push_back(GridFunction::sample(a, b, n_cells, [=](double x) {
      const double t = m * (x - a) / len;
      return t - std::floor(t) - 0.5;
    }));
  for (int m = 1; m <= 8; ++m)
    dict.push_back(GridFunction::sample(
        a, b, n_cells, [=](double x) { return std::pow((x - a) / len, m); }));
  return dict;
}

/// Dictionary lower estimate of |||T_eps - T_0||| against the certified upper
/// bound (2 + 4C) d_hat^alpha from the continuity proposition.
inline StabilityEstimate operator_distance(const PiecewiseExpandingMap& map0,
                                           const PiecewiseExpandingMap& map_eps,
                                           const std::vector<GridFunction>& dictionary,
                                           double d_hat, const BVParams& params) {
  StabilityEstimate est;
  est.eps = d_hat;
  if (dictionary.empty()) throw BadParameters("operator_distance: empty dictionary");
  const TransferApplier T0(map0, dictionary.front().n_cells());
  const TransferApplier Te(map_eps, dictionary.front().n_cells());
  for (const auto& g0 : dictionary) {
    const double norm = norm_alpha_1(g0, params);
    if (norm <= 0.0) continue;
    GridFunction g = g0;
    g *= 1.0 / norm;
    const double gap = l1_distance(Te.apply(g), T0.apply(g));
    est.op_distance_lower = std::max(est.op_distance_lower, gap);
  }
  est.op_distance_upper =
      (2.0 + 4.0 * pairing_constant(params)) * std::pow(d_hat, params.alpha);
  est.lower_le_upper = est.op_distance_lower <= est.op_distance_upper + 1e-9;
  return est;
}

/// ||h_eps - h_0||_1 at matched Ulam resolution.
inline double density_stability(const PiecewiseExpandingMap& map0,
                                const PiecewiseExpandingMap& map_eps, std::size_t n_cells) {
  return l1_distance(invariant_density(map_eps, n_cells), invariant_density(map0, n_cells));
}

inline nlohmann::json to_json(const StabilityEstimate& e) {
  return {{"eps", e.eps},
          {"op_distance_lower", e.op_distance_lower},
          {"op_distance_upper", e.op_distance_upper},
          {"density_gap", e.density_gap},
          {"lower_le_upper", e.lower_le_upper}};
}

}  // namespace statstab
