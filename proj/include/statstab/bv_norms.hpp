#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "statstab/errors.hpp"
#include "statstab/grid_function.hpp"

namespace statstab {

/// Parameters of the oscillation-based BV norm: Hölder exponent alpha, the
/// fixed cutoff eps0, and the epsilon grid the suprema are taken over.
struct BVParams {
  double alpha = 1.0;
  double eps0 = 0.05;
  std::vector<double> eps_grid;  // decreasing, in (0, eps0]

  /// eps0 = 0.05 (b-a); 32 log-spaced epsilons down to 2 cell widths.
  static BVParams defaults(double a, double b, std::size_t n_cells, double alpha) {
    BVParams p;
    p.alpha = alpha;
    p.eps0 = 0.05 * (b - a);
    const double eps_min = std::max(2.0 * (b - a) / static_cast<double>(n_cells), 1e-6 * p.eps0);
    const int m = 32;
    for (int i = 0; i < m; ++i) {
      const double t = static_cast<double>(i) / (m - 1);
      p.eps_grid.push_back(p.eps0 * std::pow(eps_min / p.eps0, t));
    }
    return p;
  }
};

namespace detail {

/// Sparse table for O(1) range max/min over cell values.
class RangeMinMax {
 public:
  explicit RangeMinMax(const std::vector<double>& v) {
    const std::size_t n = v.size();
    log2_.assign(n + 1, 0);
    for (std::size_t i = 2; i <= n; ++i) log2_[i] = log2_[i / 2] + 1;
    const int L = log2_[n] + 1;
    mx_.assign(L, v);
    mn_.assign(L, v);
    for (int l = 1; l < L; ++l)
      for (std::size_t i = 0; i + (std::size_t{1} << l) <= n; ++i) {
        mx_[l][i] = std::max(mx_[l - 1][i], mx_[l - 1][i + (std::size_t{1} << (l - 1))]);
        mn_[l][i] = std::min(mn_[l - 1][i], mn_[l - 1][i + (std::size_t{1} << (l - 1))]);
      }
  }
  // range [i, j] inclusive
  double max(std::size_t i, std::size_t j) const {
    const int l = log2_[j - i + 1];
    return std::max(mx_[l][i], mx_[l][j + 1 - (std::size_t{1} << l)]);
  }
  double min(std::size_t i, std::size_t j) const {
    const int l = log2_[j - i + 1];
    return std::min(mn_[l][i], mn_[l][j + 1 - (std::size_t{1} << l)]);
  }

 private:
  std::vector<int> log2_;
  std::vector<std::vector<double>> mx_, mn_;
};

/// Indices of cells intersecting the open ball B_eps(x), truncated to [a,b].
/// Cell j = [a + j w, a + (j+1) w); strict overlap of positive measure.
inline std::pair<long, long> ball_cells(const GridFunction& g, double eps, double x) {
  const double w = g.width();
  long jlo = static_cast<long>(std::floor((x - eps - g.a()) / w));
  long jhi = static_cast<long>(std::floor((x + eps - g.a()) / w));
  // drop cells touching the ball only at a boundary point
  if (g.a() + static_cast<double>(jlo + 1) * w <= x - eps) ++jlo;
  if (g.a() + static_cast<double>(jhi) * w >= x + eps) --jhi;
  jlo = std::max<long>(jlo, 0);
  jhi = std::min<long>(jhi, static_cast<long>(g.n_cells()) - 1);
  return {jlo, jhi};
}

}  // namespace detail

/// osc(g, eps, x): max - min of the representative over cells meeting
/// B_eps(x) ∩ [a,b].
inline double osc_point(const GridFunction& g, double eps, double x) {
  auto [jlo, jhi] = detail::ball_cells(g, eps, x);
  if (jlo > jhi) return 0.0;
  double mx = g[static_cast<std::size_t>(jlo)], mn = mx;
  for (long j = jlo + 1; j <= jhi; ++j) {
    mx = std::max(mx, g[static_cast<std::size_t>(j)]);
    mn = std::min(mn, g[static_cast<std::size_t>(j)]);
  }
  return mx - mn;
}

/// osc(g, eps) = ||osc(g, eps, .)||_1 over [lo, hi], exactly: the osc profile
/// is piecewise constant with breakpoints at cell edges ± eps.
inline double osc_total(const GridFunction& g, double eps, double lo, double hi) {
  const detail::RangeMinMax table(g.values());
  const double w = g.width();
  std::vector<double> pts;
  pts.push_back(lo);
  pts.push_back(hi);
  for (std::size_t e = 0; e <= g.n_cells(); ++e) {
    const double edge = g.a() + static_cast<double>(e) * w;
    for (double p : {edge - eps, edge + eps})
      if (p > lo && p < hi) pts.push_back(p);
  }
  std::sort(pts.begin(), pts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double seg = pts[i + 1] - pts[i];
    if (seg <= 0.0) continue;
    const double x = 0.5 * (pts[i] + pts[i + 1]);
    auto [jlo, jhi] = detail::ball_cells(g, eps, x);
    if (jlo > jhi) continue;
    const auto a = static_cast<std::size_t>(jlo), b = static_cast<std::size_t>(jhi);
    total += seg * (table.max(a, b) - table.min(a, b));
  }
  return total;
}

inline double osc_total(const GridFunction& g, double eps) {
  return osc_total(g, eps, g.a(), g.b());
}

/// var_alpha(g) = max over the eps grid of osc(g, eps) / eps^alpha
/// (a lower bound of the continuum supremum).
inline double var_alpha(const GridFunction& g, const BVParams& params) {
  double best = 0.0;
  for (double eps : params.eps_grid)
    best = std::max(best, osc_total(g, eps) / std::pow(eps, params.alpha));
  return best;
}

inline double norm_alpha_1(const GridFunction& g, const BVParams& params) {
  return var_alpha(g, params) + g.l1_norm();
}

struct LemmaCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

/// Cut-off lemma: osc(g 1_J, eps) <= 2 ∫_J osc(g|_J, eps, x) dx + (4 eps/|J|) ∫_J |g|.
/// J is snapped to cell edges.
inline LemmaCheck check_cutoff_lemma(const GridFunction& g, std::pair<double, double> J, double eps,
                                     const BVParams& params) {
  const double w = g.width();
  const double jlo = g.a() + std::round((J.first - g.a()) / w) * w;
  const double jhi = g.a() + std::round((J.second - g.a()) / w) * w;
  if (jhi - jlo < params.eps0 - 1e-12) throw JTooSmall("cutoff lemma requires |J| >= eps0");
  // g * 1_J on the same grid
  std::vector<double> cut(g.n_cells(), 0.0);
  std::vector<double> restricted;
  for (std::size_t i = 0; i < g.n_cells(); ++i) {
    const double m = g.midpoint(i);
    if (m > jlo && m < jhi) {
      cut[i] = g[i];
      restricted.push_back(g[i]);
    }
  }
  const GridFunction gJ_full(g.a(), g.b(), std::move(cut));
  LemmaCheck r;
  r.lhs = osc_total(gJ_full, eps);
  double int_abs = 0.0;
  const GridFunction gJ(jlo, jhi, std::move(restricted));
  for (std::size_t i = 0; i < gJ.n_cells(); ++i) int_abs += std::fabs(gJ[i]) * w;
  r.rhs = 2.0 * osc_total(gJ, eps) + 4.0 * eps / (jhi - jlo) * int_abs;
  r.holds = r.lhs <= r.rhs + 1e-9 + w;
  return r;
}

struct PiecewiseAverageResult {
  GridFunction gn;
  double bound = 0.0;         // certified eps^alpha var_alpha(g)
  double measured_l1 = 0.0;   // ||g - gn||_1 on the grid
  bool holds = false;
};

/// g_n = sum_j (avg of g over I_j) 1_{I_j} for a partition given by its edge
/// list (snapped to grid edges); certified bound ||g - g_n||_1 <= eps^alpha var_alpha(g).
inline PiecewiseAverageResult piecewise_average(const GridFunction& g,
                                                const std::vector<double>& partition_edges,
                                                const BVParams& params) {
  const double w = g.width();
  std::vector<std::size_t> edges;
  for (double e : partition_edges)
    edges.push_back(static_cast<std::size_t>(std::llround((e - g.a()) / w)));
  std::sort(edges.begin(), edges.end());
  if (edges.front() != 0 || edges.back() != g.n_cells())
    throw BadParameters("piecewise_average: partition must cover [a,b]");
  double max_width = 0.0;
  for (std::size_t j = 0; j + 1 < edges.size(); ++j)
    max_width = std::max(max_width, static_cast<double>(edges[j + 1] - edges[j]) * w);
  if (max_width > params.eps0 + 1e-12) throw CellTooWide("partition cell wider than eps0");
  std::vector<double> vals(g.n_cells(), 0.0);
  for (std::size_t j = 0; j + 1 < edges.size(); ++j) {
    double s = 0.0;
    for (std::size_t i = edges[j]; i < edges[j + 1]; ++i) s += g[i];
    const double avg = s / static_cast<double>(edges[j + 1] - edges[j]);
    for (std::size_t i = edges[j]; i < edges[j + 1]; ++i) vals[i] = avg;
  }
  PiecewiseAverageResult r{GridFunction(g.a(), g.b(), std::move(vals)), 0.0, 0.0, false};
  r.bound = std::pow(max_width, params.alpha) * var_alpha(g, params);
  r.measured_l1 = l1_distance(g, r.gn);
  r.holds = r.measured_l1 <= r.bound + 1e-9 + w;
  return r;
}

/// Constant C of the pairing lemma with the partition-comparability constant
/// fixed to c = 2: C = eps0^{-alpha} + 4 c 2^alpha.
inline double pairing_constant(const BVParams& params) {
  return std::pow(params.eps0, -params.alpha) + 8.0 * std::pow(2.0, params.alpha);
}

/// Pairing lemma: |∫ g phi| <= eps^alpha ||g||_{alpha,1} ||phi||_inf
///                + (C / eps^{1-alpha}) ||g||_{alpha,1} ||Phi||_inf.
inline LemmaCheck pairing_bound(const GridFunction& g, const GridFunction& phi, double eps,
                                const BVParams& params) {
  const double w = g.width();
  double inner = 0.0, Phi = 0.0, Phi_inf = 0.0;
  for (std::size_t i = 0; i < g.n_cells(); ++i) {
    inner += g[i] * phi[i] * w;
    Phi += phi[i] * w;
    Phi_inf = std::max(Phi_inf, std::fabs(Phi));
  }
  const double norm_g = norm_alpha_1(g, params);
  LemmaCheck r;
  r.lhs = std::fabs(inner);
  r.rhs = std::pow(eps, params.alpha) * norm_g * phi.linf_norm() +
          pairing_constant(params) / std::pow(eps, 1.0 - params.alpha) * norm_g * Phi_inf;
  r.holds = r.lhs <= r.rhs + 1e-9 + w;
  return r;
}

inline nlohmann::json norm_report(const GridFunction& g, const BVParams& params) {
  const double v = var_alpha(g, params);
  const double l1 = g.l1_norm();
  return {{"alpha", params.alpha}, {"eps0", params.eps0}, {"var_alpha", v}, {"l1", l1},
          {"norm", v + l1}};
}

}  // namespace statstab
