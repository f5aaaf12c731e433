#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/numeric/odeint.hpp>
#include <json.hpp>

#include "statstab/errors.hpp"
#include "statstab/map_core.hpp"

namespace statstab {

using State3 = std::array<double, 3>;

enum class FlowKind { lorenz63, linear_saddle, geometric_lorenz };

struct IntegratorControls {
  double rel_tol = 1e-9;
  double abs_tol = 1e-12;
  double max_norm = 1e6;  // blowup guard
};

/// Parametrized 3-D vector field with singularity data. The geometric_lorenz
/// kind is realized as a closed-form section map (see GeometricLorenzMap), not
/// an ODE; its lambda1/t0 fields calibrate the return-time model.
struct FlowSystem {
  FlowKind kind = FlowKind::lorenz63;
  // lorenz63
  double sigma = 10.0, rho = 28.0, b = 8.0 / 3.0;
  // linear_saddle: diag(l1, l2, l3) flow
  double l1 = 2.0, l2 = -1.0, l3 = -3.0;
  // geometric_lorenz
  double theta = 0.75, B = 0.3, nu = 2.0, lambda1 = 11.827723451163456, t0 = 0.5;

  std::vector<State3> singularities() const {
    switch (kind) {
      case FlowKind::lorenz63: {
        std::vector<State3> s{{0.0, 0.0, 0.0}};
        if (rho > 1.0) {
          const double r = std::sqrt(b * (rho - 1.0));
          s.push_back({r, r, rho - 1.0});
          s.push_back({-r, -r, rho - 1.0});
        }
        return s;
      }
      case FlowKind::linear_saddle:
        return {{0.0, 0.0, 0.0}};
      case FlowKind::geometric_lorenz:
        return {};
    }
    return {};
  }

  void rhs(const State3& x, State3& dxdt) const {
    switch (kind) {
      case FlowKind::lorenz63:
        dxdt = {sigma * (x[1] - x[0]), x[0] * (rho - x[2]) - x[1], x[0] * x[1] - b * x[2]};
        return;
      case FlowKind::linear_saddle:
        dxdt = {l1 * x[0], l2 * x[1], l3 * x[2]};
        return;
      case FlowKind::geometric_lorenz:
        throw BadParameters("geometric_lorenz has no ODE realization");
    }
  }

  Eigen::Matrix3d jacobian(const State3& x) const {
    Eigen::Matrix3d J;
    switch (kind) {
      case FlowKind::lorenz63:
        J << -sigma, sigma, 0.0, rho - x[2], -1.0, -x[0], x[1], x[0], -b;
        return J;
      case FlowKind::linear_saddle:
        J << l1, 0, 0, 0, l2, 0, 0, 0, l3;
        return J;
      case FlowKind::geometric_lorenz:
        throw BadParameters("geometric_lorenz has no ODE realization");
    }
    return J;
  }
};

inline FlowSystem flow_from_json(const nlohmann::json& doc) {
  FlowSystem s;
  const std::string kind = doc.at("kind").get<std::string>();
  if (kind == "lorenz63") {
    s.kind = FlowKind::lorenz63;
    s.sigma = doc.value("sigma", 10.0);
    s.rho = doc.value("rho", 28.0);
    s.b = doc.value("b", 8.0 / 3.0);
  } else if (kind == "linear_saddle") {
    s.kind = FlowKind::linear_saddle;
    s.l1 = doc.value("l1", 2.0);
    s.l2 = doc.value("l2", -1.0);
    s.l3 = doc.value("l3", -3.0);
    if (!(s.l1 > 0.0 && 0.0 > s.l2 && s.l2 > s.l3))
      throw BadParameters("linear_saddle: need l1 > 0 > l2 > l3");
  } else if (kind == "geometric_lorenz") {
    s.kind = FlowKind::geometric_lorenz;
    s.theta = doc.value("theta", 0.75);
    s.B = doc.value("B", 0.3);
    s.nu = doc.value("nu", 2.0);
    s.lambda1 = doc.value("lambda1", 11.827723451163456);
    s.t0 = doc.value("t0", 0.5);
  } else {
    throw BadParameters("unknown flow kind: " + kind);
  }
  return s;
}

namespace detail {

using DenseStepper = boost::numeric::odeint::result_of::make_dense_output<
    boost::numeric::odeint::runge_kutta_dopri5<State3>>::type;

inline DenseStepper make_stepper(const IntegratorControls& c) {
  return boost::numeric::odeint::make_dense_output(c.abs_tol, c.rel_tol,
                                                   boost::numeric::odeint::runge_kutta_dopri5<State3>());
}

}  // namespace detail

struct Trajectory {
  std::vector<double> times;
  std::vector<State3> states;
  State3 endpoint() const { return states.back(); }
};

/// Adaptive dense-output integration of the flow for time t; samples are taken
/// at the integrator's accepted steps.
inline Trajectory integrate(const FlowSystem& sys, const State3& x0, double t,
                            const IntegratorControls& controls = {}) {
  if (t <= 0.0) throw BadParameters("integrate: t > 0 required");
  auto stepper = detail::make_stepper(controls);
  auto rhs = [&sys](const State3& x, State3& dxdt, double) { sys.rhs(x, dxdt); };
  stepper.initialize(x0, 0.0, 1e-4);
  Trajectory traj;
  traj.times.push_back(0.0);
  traj.states.push_back(x0);
  while (stepper.current_time() < t) {
    if (stepper.current_time() + stepper.current_time_step() > t) {
      State3 xe;
      stepper.calc_state(t, xe);
      traj.times.push_back(t);
      traj.states.push_back(xe);
      break;
    }
    stepper.do_step(rhs);
    const State3& x = stepper.current_state();
    const double nrm = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
    if (!std::isfinite(nrm) || nrm > controls.max_norm) throw StepFailure("trajectory blowup");
    traj.times.push_back(stepper.current_time());
    traj.states.push_back(x);
  }
  return traj;
}

struct EigenCheck {
  std::array<double, 3> eigenvalues{};  // sorted lambda1 > lambda2 > lambda3
  bool is_lorenz_like = false;
};

/// Lorenz-like singularity check: lambda1 > 0 > lambda2 > lambda3 and
/// lambda1 + lambda2 > 0, from the linearization at an equilibrium.
inline EigenCheck lorenz_like_check(const FlowSystem& sys, const State3& sing) {
  State3 v{};
  sys.rhs(sing, v);
  if (std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) >= 1e-10)
    throw NotEquilibrium("point is not an equilibrium of the field");
  const Eigen::Matrix3d J = sys.jacobian(sing);
  Eigen::EigenSolver<Eigen::Matrix3d> es(J);
  std::array<double, 3> re{};
  bool all_real = true;
  for (int i = 0; i < 3; ++i) {
    re[i] = es.eigenvalues()[i].real();
    all_real = all_real && std::fabs(es.eigenvalues()[i].imag()) < 1e-8;
  }
  std::sort(re.begin(), re.end(), std::greater<>());
  EigenCheck out;
  out.eigenvalues = re;
  out.is_lorenz_like =
      all_real && re[0] > 0.0 && 0.0 > re[1] && re[1] > re[2] && re[0] + re[1] > 0.0;
  return out;
}

/// Passage time through the linear flow box: t = -log|x1| / lambda1.
inline double passage_time(const FlowSystem& sys, double x1_in) {
  if (sys.kind != FlowKind::linear_saddle)
    throw BadParameters("passage_time: linear_saddle only");
  if (x1_in == 0.0) throw OnStableManifold("x1 = 0 never exits the flow box");
  if (std::fabs(x1_in) >= 1.0) throw BadParameters("passage_time: |x1| < 1 required");
  return -std::log(std::fabs(x1_in)) / sys.l1;
}

/// Numeric cross-check: event detection of |x1(t)| = 1 on the integrated flow.
inline double passage_time_integrated(const FlowSystem& sys, double x1_in,
                                      const IntegratorControls& controls = {}) {
  if (x1_in == 0.0) throw OnStableManifold("x1 = 0 never exits the flow box");
  auto stepper = detail::make_stepper(controls);
  auto rhs = [&sys](const State3& x, State3& dxdt, double) { sys.rhs(x, dxdt); };
  const State3 x0{x1_in, 1.0, 1.0};
  stepper.initialize(x0, 0.0, 1e-6);
  auto event = [](const State3& x) { return std::fabs(x[0]) - 1.0; };
  double t_prev = 0.0, g_prev = event(x0);
  for (int it = 0; it < 1000000; ++it) {
    stepper.do_step(rhs);
    const double t_cur = stepper.current_time();
    const double g_cur = event(stepper.current_state());
    if (g_prev < 0.0 && g_cur >= 0.0) {
      double lo = t_prev, hi = t_cur;
      State3 xm;
      while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        stepper.calc_state(mid, xm);
        (event(xm) < 0.0 ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    }
    t_prev = t_cur;
    g_prev = g_cur;
    if (t_cur > 1e3) break;
  }
  throw NoReturn("passage_time_integrated: exit event not found");
}

/// Planar cross-section with in-plane coordinate axes and a delta margin.
struct CrossSection {
  State3 point{0.0, 0.0, 27.0};
  State3 normal{0.0, 0.0, 1.0};
  State3 e1{1.0, 0.0, 0.0};
  State3 e2{0.0, 1.0, 0.0};
  double u_min = -25.0, u_max = 25.0, v_min = -25.0, v_max = 25.0;
  double delta = 0.05;  // fraction of section width kept away from the cu-boundary
  int direction = -1;   // sign of d/dt (n . x) at admissible crossings
  bool singular_leaf_guard = false;

  State3 to_3d(double u, double v) const {
    return {point[0] + u * e1[0] + v * e2[0], point[1] + u * e1[1] + v * e2[1],
            point[2] + u * e1[2] + v * e2[2]};
  }
  std::pair<double, double> to_uv(const State3& x) const {
    const State3 d{x[0] - point[0], x[1] - point[1], x[2] - point[2]};
    return {d[0] * e1[0] + d[1] * e1[1] + d[2] * e1[2],
            d[0] * e2[0] + d[1] * e2[1] + d[2] * e2[2]};
  }
  double plane_offset(const State3& x) const {
    return normal[0] * (x[0] - point[0]) + normal[1] * (x[1] - point[1]) +
           normal[2] * (x[2] - point[2]);
  }
  bool in_bounds(double u, double v) const {
    return u >= u_min && u <= u_max && v >= v_min && v <= v_max;
  }
  /// delta-adapted sub-rectangle test: the margin is delta * width on the
  /// u-sides (the cu-boundary of the strip).
  bool delta_adapted(double u, double v) const {
    const double mu = delta * (u_max - u_min);
    return u >= u_min + mu && u <= u_max - mu && v >= v_min && v <= v_max;
  }
};

inline CrossSection section_from_json(const nlohmann::json& doc) {
  CrossSection s;
  auto arr = [&](const char* key, State3 dflt) {
    if (!doc.contains(key)) return dflt;
    auto v = doc.at(key).get<std::vector<double>>();
    return State3{v.at(0), v.at(1), v.at(2)};
  };
  s.point = arr("point", s.point);
  s.normal = arr("normal", s.normal);
  s.e1 = arr("e1", s.e1);
  s.e2 = arr("e2", s.e2);
  s.u_min = doc.value("u_min", s.u_min);
  s.u_max = doc.value("u_max", s.u_max);
  s.v_min = doc.value("v_min", s.v_min);
  s.v_max = doc.value("v_max", s.v_max);
  s.delta = doc.value("delta", s.delta);
  s.direction = doc.value("direction", s.direction);
  s.singular_leaf_guard = doc.value("singular_leaf_guard", false);
  return s;
}

struct ReturnRecord {
  double u_start = 0.0, v_start = 0.0;
  double tau = 0.0;
  double u_hit = 0.0, v_hit = 0.0;
  double t0 = 0.0;
  State3 hit3d{};
};

/// First directed crossing of the section after t0, refined by bisection on
/// the dense output to time tolerance 1e-10.
inline ReturnRecord poincare_return(const FlowSystem& sys, const CrossSection& section, double u,
                                    double v, double t0, double horizon = 1e3,
                                    const IntegratorControls& controls = {}) {
  if (!section.in_bounds(u, v)) throw OutOfDomainError("start point outside section bounds");
  if (section.singular_leaf_guard && std::fabs(u) < 1e-12)
    throw HitSingularLeaf("start point on the singular-leaf proxy");
  auto stepper = detail::make_stepper(controls);
  auto rhs = [&sys](const State3& x, State3& dxdt, double) { sys.rhs(x, dxdt); };
  const State3 x0 = section.to_3d(u, v);
  stepper.initialize(x0, 0.0, 1e-4);
  double t_prev = 0.0, g_prev = section.plane_offset(x0);
  bool left_section = std::fabs(g_prev) > 1e-9;
  while (stepper.current_time() < horizon) {
    stepper.do_step(rhs);
    const double t_cur = stepper.current_time();
    const double g_cur = section.plane_offset(stepper.current_state());
    if (!left_section) {
      left_section = std::fabs(g_cur) > 1e-9;
    } else if (t_cur > t0 && g_prev * g_cur < 0.0 &&
               static_cast<double>(section.direction) * (g_cur - g_prev) > 0.0) {
      double lo = std::max(t_prev, t0), hi = t_cur;
      State3 xm;
      while (hi - lo > 1e-10) {
        const double mid = 0.5 * (lo + hi);
        stepper.calc_state(mid, xm);
        ((section.plane_offset(xm) > 0.0) == (g_cur > 0.0) ? hi : lo) = mid;
      }
      const double tau = 0.5 * (lo + hi);
      stepper.calc_state(tau, xm);
      auto [uh, vh] = section.to_uv(xm);
      return {u, v, t0 + (tau - t0), uh, vh, t0, xm};
    }
    t_prev = t_cur;
    g_prev = g_cur;
  }
  throw NoReturn("poincare_return: horizon exceeded");
}

/// The geometric Lorenz return map on [-1,1]^2:
/// P(x, y) = (f_theta(x), B y |x|^nu + sgn(x)(1 - B)).
/// Vertical lines are invariant leaves; the fiber contraction rate is B|x|^nu < B.
struct GeometricLorenzMap {
  double theta = 0.75, B = 0.3, nu = 2.0;

  GeometricLorenzMap(double theta_, double B_, double nu_) : theta(theta_), B(B_), nu(nu_) {
    if (!(theta > 0.5 && theta < 1.0) || !(B > 0.0 && B < 1.0) || !(nu > 1.0))
      throw BadParameters("geometric lorenz map: theta in (1/2,1), B in (0,1), nu > 1");
  }

  double base(double x) const {
    const double ax = std::fabs(x);
    const double s = x >= 0.0 ? 1.0 : -1.0;
    return s * (2.0 * std::pow(ax, theta) - 1.0);
  }
  std::pair<double, double> apply(double x, double y) const {
    const double s = x >= 0.0 ? 1.0 : -1.0;
    return {base(x), B * y * std::pow(std::fabs(x), nu) + s * (1.0 - B)};
  }
};

/// Quotient of the geometric model: collapsing vertical leaves is exact and
/// reproduces the lorenz_theta family member.
inline PiecewiseExpandingMap collapse_foliation(const GeometricLorenzMap& P) {
  return make_lorenz_theta(P.theta);
}

/// sup over samples of |f(p(z)) - p(P(z))| with p = first coordinate.
inline double semiconjugacy_residual(const GeometricLorenzMap& P, const PiecewiseExpandingMap& f,
                                     std::size_t n_samples) {
  double worst = 0.0;
  const auto n = static_cast<std::size_t>(std::sqrt(static_cast<double>(n_samples)));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double x = -1.0 + (2.0 * (static_cast<double>(i) + 0.5)) / static_cast<double>(n);
      const double y = -1.0 + (2.0 * (static_cast<double>(j) + 0.5)) / static_cast<double>(n);
      if (f.is_cut_point(x)) continue;
      worst = std::max(worst, std::fabs(eval(f, x) - P.apply(x, y).first));
    }
  return worst;
}

// --- Stable-foliation collapse for simulated flows -------------------------

/// Finite-time forward Jacobian DX_T(x) by integrating the variational
/// equations alongside the flow.
inline Eigen::Matrix3d flow_jacobian(const FlowSystem& sys, const State3& x0, double T,
                                     const IntegratorControls& controls = {}) {
  using Vec12 = std::array<double, 12>;
  auto rhs = [&sys](const Vec12& z, Vec12& dz, double) {
    const State3 x{z[0], z[1], z[2]};
    State3 dx;
    sys.rhs(x, dx);
    dz[0] = dx[0];
    dz[1] = dx[1];
    dz[2] = dx[2];
    const Eigen::Matrix3d J = sys.jacobian(x);
    for (int col = 0; col < 3; ++col) {
      Eigen::Vector3d v(z[3 + col], z[6 + col], z[9 + col]);
      Eigen::Vector3d dv = J * v;
      dz[3 + col] = dv[0];
      dz[6 + col] = dv[1];
      dz[9 + col] = dv[2];
    }
  };
  Vec12 z{x0[0], x0[1], x0[2], 1, 0, 0, 0, 1, 0, 0, 0, 1};
  auto stepper = boost::numeric::odeint::make_controlled(
      controls.abs_tol, controls.rel_tol, boost::numeric::odeint::runge_kutta_dopri5<Vec12>());
  boost::numeric::odeint::integrate_adaptive(stepper, rhs, z, 0.0, T, 1e-4);
  Eigen::Matrix3d M;
  M << z[3], z[4], z[5], z[6], z[7], z[8], z[9], z[10], z[11];
  return M;
}

/// Strong-stable direction at x0: the most-contracted right singular vector of
/// the finite-time forward Jacobian.
inline Eigen::Vector3d stable_direction(const FlowSystem& sys, const State3& x0, double T = 2.0) {
  const Eigen::Matrix3d M = flow_jacobian(sys, x0, T);
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(M, Eigen::ComputeFullV);
  return svd.matrixV().col(2);  // smallest singular value
}

struct QuotientTable {
  std::vector<double> leaf_in;   // sorted leaf coordinates
  std::vector<double> leaf_out;  // quotient map values
  double cut = 0.0;              // detected discontinuity location
  double residual = 0.0;         // local scatter of the tabulated map
};

/// Collapse the (approximate) stable foliation of a simulated return dataset:
/// leaf coordinate = component orthogonal to the averaged stable direction in
/// section coordinates.
inline QuotientTable collapse_foliation(const FlowSystem& sys, const CrossSection& section,
                                        const std::vector<ReturnRecord>& returns,
                                        double residual_threshold = 0.05) {
  if (returns.size() < 16) throw BadParameters("collapse_foliation: need >= 16 returns");
  // averaged stable direction projected into the section plane
  Eigen::Vector2d s_dir(0.0, 0.0);
  const std::size_t stride = std::max<std::size_t>(1, returns.size() / 32);
  for (std::size_t i = 0; i < returns.size(); i += stride) {
    const Eigen::Vector3d v = stable_direction(sys, returns[i].hit3d);
    Eigen::Vector2d p(v[0] * section.e1[0] + v[1] * section.e1[1] + v[2] * section.e1[2],
                      v[0] * section.e2[0] + v[1] * section.e2[1] + v[2] * section.e2[2]);
    if (p.norm() < 1e-12) continue;
    p.normalize();
    if (p.dot(s_dir) < 0.0) p = -p;
    s_dir += p;
  }
  if (s_dir.norm() < 1e-12) throw FoliationAmbiguous("stable direction estimate degenerate");
  s_dir.normalize();
  const Eigen::Vector2d leaf_axis(-s_dir[1], s_dir[0]);  // transversal coordinate axis
  auto leaf_coord = [&](double u, double v) { return u * leaf_axis[0] + v * leaf_axis[1]; };
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : returns)
    pts.emplace_back(leaf_coord(r.u_start, r.v_start), leaf_coord(r.u_hit, r.v_hit));
  std::sort(pts.begin(), pts.end());
  QuotientTable t;
  for (const auto& [ci, co] : pts) {
    t.leaf_in.push_back(ci);
    t.leaf_out.push_back(co);
  }
  // discontinuity = largest output jump between adjacent leaf coordinates
  double best_jump = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double jump = std::fabs(pts[i + 1].second - pts[i].second);
    if (jump > best_jump) {
      best_jump = jump;
      t.cut = 0.5 * (pts[i].first + pts[i + 1].first);
    }
  }
  // residual: non-smoothness of the table away from the cut
  double rss = 0.0;
  std::size_t m = 0;
  const double span = pts.back().first - pts.front().first;
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    if (std::fabs(pts[i].first - t.cut) < 0.02 * span) continue;
    const double du = pts[i + 1].first - pts[i - 1].first;
    if (du <= 0.0) continue;
    const double lin = pts[i - 1].second +
                       (pts[i + 1].second - pts[i - 1].second) * (pts[i].first - pts[i - 1].first) / du;
    rss += std::fabs(pts[i].second - lin);
    ++m;
  }
  t.residual = m > 0 ? rss / static_cast<double>(m) / std::max(span, 1e-12) : 0.0;
  if (t.residual > residual_threshold)
    throw FoliationAmbiguous("leaf-coordinate fitting residual above threshold");
  return t;
}

// --- Return-time integrability ---------------------------------------------

struct ReturnTimeEstimate {
  double estimate = 0.0;
  bool converged = false;
  double near_leaf_slope = 0.0;  // fitted coefficient of -log|x|, approx 1/lambda1
  double lambda1 = 0.0;
};

/// Monte Carlo integral of tau over a symmetric section coordinate
/// x in [-X, X] under normalized Lebesgue measure, stratified geometrically
/// toward the singular leaf at x = 0.
inline ReturnTimeEstimate return_time_integral_mc(const std::function<double(double)>& tau,
                                                  double X, std::size_t n_samples,
                                                  std::uint64_t seed = 1234) {
  if (n_samples < 1000) throw BadParameters("return_time_integral: n_samples >= 1e3");
  auto estimate_with = [&](std::size_t n, std::uint64_t sd) {
    std::mt19937_64 rng(sd);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const int J = 40;  // strata [X 2^{-(j+1)}, X 2^{-j}]; tail below X 2^{-J} is negligible
    const std::size_t per = std::max<std::size_t>(8, n / (2 * J));
    double acc = 0.0;
    for (int side = -1; side <= 1; side += 2) {
      for (int j = 0; j < J; ++j) {
        const double hi = X * std::pow(2.0, -j), lo = 0.5 * hi;
        double mean = 0.0;
        for (std::size_t s = 0; s < per; ++s)
          mean += tau(static_cast<double>(side) * (lo + (hi - lo) * unif(rng)));
        mean /= static_cast<double>(per);
        acc += mean * (hi - lo);
      }
    }
    return acc / (2.0 * X);
  };
  ReturnTimeEstimate out;
  const double e1 = estimate_with(n_samples, seed);
  const double e2 = estimate_with(2 * n_samples, seed + 1);
  out.estimate = e2;
  out.converged = std::fabs(e2 - e1) < 0.02 * std::max(std::fabs(e2), 1e-12);
  // near-leaf stratum: least-squares fit tau ~ a + s * (-log|x|)
  std::mt19937_64 rng(seed + 2);
  std::uniform_real_distribution<double> unif(std::log(1e-8), std::log(1e-3));
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const int m = 512;
  for (int i = 0; i < m; ++i) {
    const double x = std::exp(unif(rng));
    const double lx = -std::log(x);
    const double y = tau(x);
    sx += lx;
    sy += y;
    sxx += lx * lx;
    sxy += lx * y;
  }
  out.near_leaf_slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return out;
}

/// System-level wrapper using each kind's passage-time model.
inline ReturnTimeEstimate return_time_integral(const FlowSystem& sys, std::size_t n_samples,
                                               std::uint64_t seed = 1234) {
  ReturnTimeEstimate out;
  switch (sys.kind) {
    case FlowKind::linear_saddle:
      out = return_time_integral_mc(
          [&sys](double x) { return -std::log(std::fabs(x)) / sys.l1; }, 0.5, n_samples, seed);
      out.lambda1 = sys.l1;
      return out;
    case FlowKind::geometric_lorenz:
      out = return_time_integral_mc(
          [&sys](double x) { return sys.t0 - std::log(std::fabs(x)) / sys.lambda1; }, 1.0,
          n_samples, seed);
      out.lambda1 = sys.lambda1;
      return out;
    case FlowKind::lorenz63:
      throw BadParameters("return_time_integral: no closed-form tau model for lorenz63");
  }
  return out;
}

}  // namespace statstab
