#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "statstab/bv_norms.hpp"
#include "statstab/errors.hpp"
#include "statstab/flow_lab.hpp"
#include "statstab/grid_function.hpp"
#include "statstab/map_core.hpp"
#include "statstab/transfer.hpp"

namespace statstab {

struct Observable {
  std::string name;
  std::function<double(double)> fn;  // on the normalized coordinate s in [0,1]
  double lipschitz = 1.0;
};

/// Versioned finite dictionary metrizing the weak* topology on bounded sets
/// ("obs-v1"); all observables bounded by 1 in sup norm.
inline std::vector<Observable> observable_dictionary() {
  constexpr double pi = 3.14159265358979323846;
  std::vector<Observable> d;
  d.push_back({"s", [](double s) { return s; }, 1.0});
  d.push_back({"s2", [](double s) { return s * s; }, 2.0});
  d.push_back({"s3", [](double s) { return s * s * s; }, 3.0});
  d.push_back({"sin_2pi", [=](double s) { return std::sin(2.0 * pi * s); }, 2.0 * pi});
  d.push_back({"cos_2pi", [=](double s) { return std::cos(2.0 * pi * s); }, 2.0 * pi});
  d.push_back({"sin_4pi", [=](double s) { return std::sin(4.0 * pi * s); }, 4.0 * pi});
  // mollified indicator of [0, 1/2], ramp width 0.05
  d.push_back({"moll_half",
               [](double s) {
                 const double r = (0.525 - s) / 0.05;
                 return std::clamp(r, 0.0, 1.0);
               },
               20.0});
  return d;
}

inline double normalized_coord(const PiecewiseExpandingMap& map, double x) {
  return (x - map.a()) / map.length();
}

/// Space average of phi under the density h: ∫ phi(s(x)) h(x) dx.
inline double space_average(const PiecewiseExpandingMap& map, const GridFunction& h,
                            const Observable& phi) {
  double s = 0.0;
  for (std::size_t i = 0; i < h.n_cells(); ++i)
    s += phi.fn(normalized_coord(map, h.midpoint(i))) * h[i] * h.width();
  return s;
}

struct BirkhoffResult {
  double mean = 0.0;
  double sigma_clt = 0.0;  // batch-means CLT standard deviation of the mean
};

/// Time average of phi along the orbit of x0 with 10% burn-in. A seeded
/// per-step jitter of size 1e-14 keeps binary-digit-shift maps (doubling)
/// from collapsing onto the fixed point of the floating-point lattice; its
/// effect on the statistics is below the CLT noise floor.
inline BirkhoffResult birkhoff_average(const PiecewiseExpandingMap& map, const Observable& phi,
                                       double x0, std::size_t horizon, std::uint64_t seed = 17,
                                       double burn_fraction = 0.1) {
  if (horizon < 1000) throw BadParameters("birkhoff_average: horizon >= 1e3");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const double jitter = 1e-14 * map.length();
  const std::size_t burn = static_cast<std::size_t>(burn_fraction * static_cast<double>(horizon));
  double x = x0;
  auto step = [&](double xi) {
    double xn = eval(map, xi) + jitter * unif(rng);
    const double margin = 1e-13 * map.length();
    xn = std::clamp(xn, map.a() + margin, map.b() - margin);
    while (map.is_cut_point(xn)) xn += 10.0 * kCutPointTol;
    return xn;
  };
  for (std::size_t i = 0; i < burn; ++i) x = step(x);
  const std::size_t n_batches = 64;
  const std::size_t per = (horizon - burn) / n_batches;
  std::vector<double> batch(n_batches, 0.0);
  for (std::size_t b = 0; b < n_batches; ++b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < per; ++i) {
      acc += phi.fn(normalized_coord(map, x));
      x = step(x);
    }
    batch[b] = acc / static_cast<double>(per);
  }
  BirkhoffResult r;
  for (double v : batch) r.mean += v;
  r.mean /= static_cast<double>(n_batches);
  double var = 0.0;
  for (double v : batch) var += (v - r.mean) * (v - r.mean);
  var /= static_cast<double>(n_batches - 1);
  r.sigma_clt = std::sqrt(var / static_cast<double>(n_batches));
  return r;
}

/// Time average of h along an integrated flow orbit (fixed-step sampling of
/// the dense trajectory).
inline double birkhoff_average_flow(const FlowSystem& sys, const std::function<double(State3)>& h,
                                    const State3& x0, double horizon, double dt = 0.01,
                                    double burn_fraction = 0.1) {
  const Trajectory warm = integrate(sys, x0, burn_fraction * horizon);
  auto stepper = detail::make_stepper(IntegratorControls{});
  auto rhs = [&sys](const State3& x, State3& dxdt, double) { sys.rhs(x, dxdt); };
  stepper.initialize(warm.endpoint(), 0.0, 1e-4);
  const double T = (1.0 - burn_fraction) * horizon;
  double t_sample = 0.0, acc = 0.0;
  std::size_t n = 0;
  State3 xs;
  while (t_sample < T) {
    while (stepper.current_time() < t_sample) stepper.do_step(rhs);
    stepper.calc_state(t_sample, xs);
    acc += h(xs);
    ++n;
    t_sample += dt;
  }
  return acc / static_cast<double>(n);
}

/// Empirical lift of the quotient invariant measure to the section:
/// per-base-cell fiber ensembles pushed forward under P, with base weights
/// pinned to nu (f pushes nu to itself, so pinning removes binning drift;
/// fiber contraction makes any seeding converge at rate B^n).
class LiftedMeasure {
 public:
  struct FiberPoint {
    double y;
    double weight;  // relative within the cell
  };

  LiftedMeasure(const GeometricLorenzMap& P, const GridFunction& nu, int n, int fibers_per_cell = 8,
                int strata_per_cell = 8, std::size_t max_fiber_points = 64)
      : P_(P), nu_(nu), n_(n) {
    if (n < 1) throw BadParameters("lift_to_section: n >= 1");
    cells_.resize(nu.n_cells());
    for (auto& c : cells_) {
      c.reserve(fibers_per_cell);
      for (int q = 0; q < fibers_per_cell; ++q)
        c.push_back({-1.0 + 2.0 * (q + 0.5) / fibers_per_cell, 1.0 / fibers_per_cell});
    }
    for (int step = 0; step < n; ++step) push_once(strata_per_cell, max_fiber_points);
  }

  double integrate(const std::function<double(double, double)>& g) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < cells_.size(); ++i) {
      const double wb = nu_[i] * nu_.width();
      for (const auto& fp : cells_[i]) acc += wb * fp.weight * g(nu_.midpoint(i), fp.y);
    }
    return acc;
  }

  /// Base marginal is nu by construction.
  const GridFunction& base_marginal() const { return nu_; }
  int depth() const { return n_; }
  const std::vector<std::vector<FiberPoint>>& cells() const { return cells_; }

 private:
  void push_once(int strata, std::size_t max_pts) {
    std::vector<std::vector<FiberPoint>> next(cells_.size());
    std::vector<double> mass(cells_.size(), 0.0);
    const double w = nu_.width();
    for (std::size_t i = 0; i < cells_.size(); ++i) {
      const double wb = nu_[i] * w;
      if (wb <= 0.0) continue;
      for (int s = 0; s < strata; ++s) {
        const double x = nu_.a() + (static_cast<double>(i) + (s + 0.5) / strata) * w;
        for (const auto& fp : cells_[i]) {
          auto [xn, yn] = P_.apply(x, fp.y);
          const std::size_t j = nu_.cell_index(xn);
          const double wgt = wb * fp.weight / strata;
          next[j].push_back({yn, wgt});
          mass[j] += wgt;
        }
      }
    }
    for (std::size_t j = 0; j < next.size(); ++j) {
      auto& c = next[j];
      if (c.empty() || mass[j] <= 0.0) {
        // unreached cell: keep a neutral fiber so the pinned base weight stays integrable
        c = {{0.0, 1.0}};
        continue;
      }
      for (auto& fp : c) fp.weight /= mass[j];  // renormalize: base weight stays nu_j
      std::sort(c.begin(), c.end(),
                [](const FiberPoint& p, const FiberPoint& q) { return p.y < q.y; });
      while (c.size() > max_pts) {  // merge nearest-y neighbors, weight preserving
        std::size_t best = 0;
        double gap = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k + 1 < c.size(); ++k)
          if (c[k + 1].y - c[k].y < gap) {
            gap = c[k + 1].y - c[k].y;
            best = k;
          }
        const double wsum = c[best].weight + c[best + 1].weight;
        c[best].y = (c[best].y * c[best].weight + c[best + 1].y * c[best + 1].weight) / wsum;
        c[best].weight = wsum;
        c.erase(c.begin() + static_cast<long>(best) + 1);
      }
    }
    cells_ = std::move(next);
  }

  GeometricLorenzMap P_;
  GridFunction nu_;
  int n_;
  std::vector<std::vector<FiberPoint>> cells_;
};

struct LiftResult {
  LiftedMeasure measure;       // the gamma_{2n} representation
  double diagnostic = 0.0;     // sup over dictionary of |∫g dgamma_n - ∫g dgamma_{2n}|
  bool converged = false;
};

inline LiftResult lift_to_section(const GeometricLorenzMap& P, const GridFunction& nu, int n) {
  LiftedMeasure gn(P, nu, n), g2n(P, nu, 2 * n);
  std::vector<std::function<double(double, double)>> probes;
  for (const auto& obs : observable_dictionary()) {
    auto fn = obs.fn;
    probes.emplace_back([fn](double x, double) { return fn(0.5 * (x + 1.0)); });
  }
  probes.emplace_back([](double, double y) { return y; });
  probes.emplace_back([](double, double y) { return y * y; });
  probes.emplace_back([](double x, double y) { return x * y; });
  double diag = 0.0;
  for (const auto& g : probes) diag = std::max(diag, std::fabs(gn.integrate(g) - g2n.integrate(g)));
  LiftResult r{std::move(g2n), diag, diag <= 1e-3};
  return r;
}

/// Saturation along the flow:
/// ∫h dmu = (1/gamma(tau)) ∫ ∫_0^{tau(x)} h(x, y, t) dt dgamma(x, y),
/// inner integral by 16-point Gauss-Legendre per fiber point.
inline double saturate_to_flow(const LiftedMeasure& gamma,
                               const std::function<double(double)>& tau,
                               const std::function<double(double, double, double)>& h) {
  static const double gl_x[8] = {0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
                                 0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
                                 0.9445750230732326, 0.9894009349916499};
  static const double gl_w[8] = {0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
                                 0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
                                 0.0622535239386479, 0.0271524594117541};
  double num = 0.0, den = 0.0;
  const auto& nu = gamma.base_marginal();
  for (std::size_t i = 0; i < gamma.cells().size(); ++i) {
    const double x = nu.midpoint(i);
    const double wb = nu[i] * nu.width();
    if (wb <= 0.0) continue;
    const double tx = tau(x);
    for (const auto& fp : gamma.cells()[i]) {
      // Numerator and denominator share the same quadrature so that h == 1
      // yields exactly gamma(tau)/gamma(tau) = 1.
      double inner = 0.0, inner1 = 0.0;
      for (int q = 0; q < 8; ++q) {
        const double half = 0.5 * tx;
        inner += gl_w[q] * (h(x, fp.y, half * (1.0 - gl_x[q])) + h(x, fp.y, half * (1.0 + gl_x[q])));
        inner1 += gl_w[q] * 2.0;
      }
      num += wb * fp.weight * (0.5 * tx * inner);
      den += wb * fp.weight * (0.5 * tx * inner1);
    }
  }
  if (den == 0.0) throw BadParameters("saturate_to_flow: gamma(tau) = 0");
  return num / den;
}

// --- Statistical-stability sweep --------------------------------------------

struct StabilityRow {
  double eps = 0.0;
  double map_distance_bound = 0.0;
  double op_distance_lower = 0.0;
  double op_distance_upper = 0.0;
  double density_gap_l1 = 0.0;
  double weakstar_gap_quotient = 0.0;
  double weakstar_gap_flow = std::numeric_limits<double>::quiet_NaN();
  double birkhoff_gap = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

struct StabilityReport {
  std::string family;
  std::vector<StabilityRow> rows;  // sorted by eps (input order preserved)
  double fitted_slope = std::numeric_limits<double>::quiet_NaN();
  double fit_r2 = std::numeric_limits<double>::quiet_NaN();
};

struct SweepConfig {
  std::size_t n_cells = 4096;
  bool with_birkhoff = false;
  std::size_t birkhoff_horizon = 1000000;
  std::uint64_t seed = 17;
  // geometric family extras
  bool with_flow_level = false;
  double geometric_B = 0.3, geometric_nu = 2.0, geometric_lambda1 = 11.827723451163456,
         geometric_t0 = 0.5;
  int lift_depth = 4;
};

namespace detail {

struct FamilyPair {
  PiecewiseExpandingMap f0;
  PiecewiseExpandingMap f_eps;
  Diffeo sigma;
  std::vector<std::pair<double, double>> A;
};

inline FamilyPair make_family_pair(const std::string& family, double base_param, double eps) {
  constexpr double pi = 3.14159265358979323846;
  if (family == "perturbed_doubling") {
    Diffeo sigma{[eps](double x) { return x + 0.5 * eps * std::sin(2.0 * pi * x); },
                 [eps](double x) { return 1.0 + pi * eps * std::cos(2.0 * pi * x); }};
    return {make_doubling(),
            eps == 0.0 ? make_doubling() : make_perturbed_doubling(eps),
            std::move(sigma),
            {{0.0, 1.0}}};
  }
  if (family == "lorenz_theta") {
    const double t0 = base_param, t1 = base_param + eps;
    const double s = t1 / t0;  // f_{t0} ∘ sigma = f_{t1} with sigma(u) = sgn(u)|u|^s
    Diffeo sigma{[s](double u) { return u >= 0.0 ? std::pow(u, s) : -std::pow(-u, s); },
                 [s](double u) {
                   const double au = std::fabs(u);
                   return au == 0.0 ? (s > 1.0 ? 0.0 : std::numeric_limits<double>::infinity())
                                    : s * std::pow(au, s - 1.0);
                 }};
    return {make_lorenz_theta(t0), make_lorenz_theta(t1), std::move(sigma), {{-1.0, 1.0}}};
  }
  throw BadParameters("stability_sweep: unknown family " + family);
}

}  // namespace detail

/// Full per-epsilon pipeline: map distance bound, operator distance, density
/// gap, weak* gaps, optional flow-level gap via lift/saturate, with a final
/// log-log slope fit of the density gap.
inline StabilityReport stability_sweep(const std::string& family, double base_param,
                                       const std::vector<double>& eps_list,
                                       const SweepConfig& cfg = {}) {
  StabilityReport rep;
  rep.family = family;
  const auto dict = observable_dictionary();
  const auto pair0 = detail::make_family_pair(family, base_param, 0.0);
  const GridFunction h0 = invariant_density(pair0.f0, cfg.n_cells);
  const BVParams params =
      BVParams::defaults(pair0.f0.a(), pair0.f0.b(), cfg.n_cells, pair0.f0.alpha());
  const auto op_dict = build_dictionary(pair0.f0.a(), pair0.f0.b(), cfg.n_cells);

  std::vector<double> lift_gaps0;
  LiftResult lift0 = [&]() -> LiftResult {
    if (cfg.with_flow_level && family == "lorenz_theta") {
      GeometricLorenzMap P0(base_param, cfg.geometric_B, cfg.geometric_nu);
      return lift_to_section(P0, h0, cfg.lift_depth);
    }
    return LiftResult{LiftedMeasure(GeometricLorenzMap(0.75, 0.3, 2.0),
                                    GridFunction::constant(-1, 1, 2, 0.5), 1),
                      0.0, false};
  }();

  for (double eps : eps_list) {
    StabilityRow row;
    row.eps = eps;
    try {
      const auto pair = detail::make_family_pair(family, base_param, eps);
      row.map_distance_bound =
          eps == 0.0 ? 0.0 : map_distance_upper(pair.f0, pair.f_eps, pair.sigma, pair.A);
      auto est = operator_distance(pair.f0, pair.f_eps, op_dict, row.map_distance_bound, params);
      row.op_distance_lower = est.op_distance_lower;
      row.op_distance_upper = est.op_distance_upper;
      const GridFunction he = invariant_density(pair.f_eps, cfg.n_cells);
      row.density_gap_l1 = l1_distance(he, h0);
      for (const auto& phi : dict)
        row.weakstar_gap_quotient =
            std::max(row.weakstar_gap_quotient, std::fabs(space_average(pair.f_eps, he, phi) -
                                                          space_average(pair.f0, h0, phi)));
      if (cfg.with_birkhoff) {
        double worst = 0.0;
        for (const auto& phi : dict) {
          const auto bk = birkhoff_average(pair.f_eps, phi,
                                           pair.f_eps.a() + 0.37 * pair.f_eps.length(),
                                           cfg.birkhoff_horizon, cfg.seed);
          worst = std::max(worst, std::fabs(bk.mean - space_average(pair.f_eps, he, phi)));
        }
        row.birkhoff_gap = worst;
      }
      if (cfg.with_flow_level && family == "lorenz_theta") {
        GeometricLorenzMap Pe(base_param + eps, cfg.geometric_B, cfg.geometric_nu);
        const auto lifte = lift_to_section(Pe, he, cfg.lift_depth);
        auto tau = [&](double x) {
          return cfg.geometric_t0 - std::log(std::max(std::fabs(x), 1e-12)) / cfg.geometric_lambda1;
        };
        double worst = 0.0;
        for (const auto& phi : dict) {
          auto h3 = [&phi](double x, double, double) { return phi.fn(0.5 * (x + 1.0)); };
          worst = std::max(worst, std::fabs(saturate_to_flow(lifte.measure, tau, h3) -
                                            saturate_to_flow(lift0.measure, tau, h3)));
        }
        row.weakstar_gap_flow = worst;
      }
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rep.rows.push_back(row);
  }
  // log-log fit of density gap vs eps over rows with eps > 0 and gap > 0
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  int m = 0;
  for (const auto& r : rep.rows) {
    if (r.eps <= 0.0 || r.density_gap_l1 <= 0.0 || !r.error.empty()) continue;
    const double x = std::log(r.eps), y = std::log(r.density_gap_l1);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
    ++m;
  }
  if (m >= 2) {
    rep.fitted_slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    const double r_num = m * sxy - sx * sy;
    const double r_den = std::sqrt((m * sxx - sx * sx) * (m * syy - sy * sy));
    rep.fit_r2 = r_den > 0.0 ? (r_num / r_den) * (r_num / r_den)
                             : std::numeric_limits<double>::quiet_NaN();
  }
  return rep;
}

inline nlohmann::json to_json(const StabilityReport& rep) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : rep.rows) {
    nlohmann::json j = {{"eps", r.eps},
                        {"map_distance_bound", r.map_distance_bound},
                        {"op_distance_lower", r.op_distance_lower},
                        {"op_distance_upper", r.op_distance_upper},
                        {"density_gap_l1", r.density_gap_l1},
                        {"weakstar_gap_quotient", r.weakstar_gap_quotient}};
    if (std::isfinite(r.weakstar_gap_flow)) j["weakstar_gap_flow"] = r.weakstar_gap_flow;
    if (std::isfinite(r.birkhoff_gap)) j["birkhoff_gap"] = r.birkhoff_gap;
    if (!r.error.empty()) j["error"] = r.error;
    rows.push_back(j);
  }
  nlohmann::json j = {{"family", rep.family}, {"rows", rows}, {"observables", "obs-v1"},
                      {"op_dictionary", "dict-v1"}};
  if (std::isfinite(rep.fitted_slope)) {
    j["fitted_slope"] = rep.fitted_slope;
    j["fit_r2"] = rep.fit_r2;
  }
  return j;
}

}  // namespace statstab
