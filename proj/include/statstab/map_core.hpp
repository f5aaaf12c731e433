#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "statstab/errors.hpp"

namespace statstab {

inline constexpr double kCutPointTol = 1e-14;
inline constexpr double kPreimageTol = 1e-12;

/// One monotone C^{1+alpha} branch on an open subinterval (lo, hi).
/// forward/derivative extend continuously to the closure, so image endpoints
/// are evaluated at lo and hi directly.
struct Branch {
  double lo = 0.0;
  double hi = 1.0;
  std::function<double(double)> forward;
  std::function<double(double)> derivative;
  int orientation = +1;  // +1 increasing, -1 decreasing

  double image_lo() const { return orientation > 0 ? forward(lo) : forward(hi); }
  double image_hi() const { return orientation > 0 ? forward(hi) : forward(lo); }
};

struct Preimage {
  double x;          // preimage point
  double abs_deriv;  // |f'(x)|
};

class PiecewiseExpandingMap {
 public:
  PiecewiseExpandingMap(double a, double b, std::vector<Branch> branches, double beta,
                        double alpha, double var_bound, std::string family = "custom",
                        nlohmann::json params = nlohmann::json::object())
      : a_(a),
        b_(b),
        branches_(std::move(branches)),
        beta_(beta),
        alpha_(alpha),
        var_bound_(var_bound),
        family_(std::move(family)),
        params_(std::move(params)) {
    if (branches_.empty()) throw BadParameters("map: no branches");
    if (beta_ <= 1.0) throw BadParameters("map: expansion bound beta must exceed 1");
    if (alpha_ <= 0.0 || alpha_ > 1.0) throw BadParameters("map: alpha outside (0,1]");
    cuts_.push_back(a_);
    for (const auto& br : branches_) cuts_.push_back(br.hi);
    for (std::size_t i = 0; i + 1 < branches_.size(); ++i)
      if (std::fabs(branches_[i].hi - branches_[i + 1].lo) > kCutPointTol)
        throw BadParameters("map: branch domains leave a gap");
  }

  double a() const { return a_; }
  double b() const { return b_; }
  double length() const { return b_ - a_; }
  double beta() const { return beta_; }
  double alpha() const { return alpha_; }
  double var_bound() const { return var_bound_; }
  const std::string& family() const { return family_; }
  const nlohmann::json& params() const { return params_; }
  const std::vector<Branch>& branches() const { return branches_; }

  /// Branch endpoints including a and b, sorted.
  const std::vector<double>& cut_points() const { return cuts_; }

  bool is_cut_point(double x) const {
    for (double c : cuts_)
      if (std::fabs(x - c) <= kCutPointTol) return true;
    return false;
  }

  /// Smallest branch-domain length |I_m|.
  double min_branch_length() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& br : branches_) m = std::min(m, br.hi - br.lo);
    return m;
  }

  const Branch& branch_containing(double x) const {
    if (x < a_ - kCutPointTol || x > b_ + kCutPointTol)
      throw OutOfDomainError("x outside map interval");
    if (is_cut_point(x)) throw CutPointError("x is a cut point");
    for (const auto& br : branches_)
      if (x > br.lo && x < br.hi) return br;
    throw OutOfDomainError("x not covered by any branch");
  }

 private:
  double a_, b_;
  std::vector<Branch> branches_;
  double beta_, alpha_, var_bound_;
  std::string family_;
  nlohmann::json params_;
  std::vector<double> cuts_;
};

inline double eval(const PiecewiseExpandingMap& map, double x) {
  return map.branch_containing(x).forward(x);
}

inline double derivative(const PiecewiseExpandingMap& map, double x) {
  return map.branch_containing(x).derivative(x);
}

namespace detail {

/// Bracketed monotone root finding for f(u) = y on [lo, hi]:
/// bisection to shrink the bracket, Newton once it is safe.
inline double invert_monotone(const std::function<double(double)>& f,
                              const std::function<double(double)>& df, double lo, double hi,
                              double y, int orientation) {
  double flo = f(lo) - y, fhi = f(hi) - y;
  if (orientation < 0) std::swap(flo, fhi);
  if (flo > 0.0 && flo < 1e-14) flo = 0.0;
  if (fhi < 0.0 && fhi > -1e-14) fhi = 0.0;
  if (flo > 0.0 || fhi < 0.0) {
    // y outside image; clamp to nearest endpoint.
    return std::fabs(flo) < std::fabs(fhi) ? (orientation > 0 ? lo : hi)
                                           : (orientation > 0 ? hi : lo);
  }
  double u = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double fu = f(u) - y;
    if (fu == 0.0) return u;
    if ((fu > 0.0) == (orientation > 0))
      hi = u;
    else
      lo = u;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * (std::fabs(lo) + std::fabs(hi)) ||
        hi - lo <= std::numeric_limits<double>::denorm_min())
      break;
    double next = u - fu / df(u);
    if (!std::isfinite(next) || next <= lo || next >= hi) next = 0.5 * (lo + hi);
    u = next;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// All solutions of f(x) = y, one per branch whose image contains y,
/// ordered by preimage position, with |f'| at each solution.
inline std::vector<Preimage> preimages(const PiecewiseExpandingMap& map, double y) {
  std::vector<Preimage> out;
  for (const auto& br : map.branches()) {
    const double ilo = br.image_lo(), ihi = br.image_hi();
    if (y < ilo - 1e-13 || y > ihi + 1e-13) continue;
    const double x =
        detail::invert_monotone(br.forward, br.derivative, br.lo, br.hi, y, br.orientation);
    out.push_back({x, std::fabs(br.derivative(x))});
  }
  std::sort(out.begin(), out.end(), [](const Preimage& p, const Preimage& q) { return p.x < q.x; });
  return out;
}

/// Lower estimate of V_{1/alpha}(1/|f'|) over dyadic partitions of depth
/// `resolution`: exact supremum over sub-partitions of the sampled points
/// via dynamic programming (one-sided samples at cut points, jump counted once).
inline double var_inverse_derivative(const PiecewiseExpandingMap& map, double alpha,
                                     int resolution) {
  if (resolution < 2) throw BadParameters("var_inverse_derivative: resolution >= 2");
  if (alpha <= 0.0 || alpha > 1.0) throw BadParameters("var_inverse_derivative: alpha in (0,1]");
  const double p = 1.0 / alpha;
  // Sample 1/|f'| at dyadic points; at cut points take both one-sided values.
  std::vector<double> samples;
  const std::size_t n = std::size_t{1} << resolution;
  const double w = map.length() / static_cast<double>(n);
  const double nudge = std::max(1e-12, 1e-9 * w);
  auto push_value = [&](double x) {
    const double d = std::fabs(derivative(map, x));
    if (!std::isfinite(d)) throw NonFiniteDerivative("f' non-finite away from cut points");
    // 1/f' -> 0 where the derivative blows up (singular branch ends).
    samples.push_back(d == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / d);
  };
  for (std::size_t i = 0; i <= n; ++i) {
    const double x = map.a() + static_cast<double>(i) * w;
    if (map.is_cut_point(x)) {
      if (x - nudge > map.a()) push_value(x - nudge);
      if (x + nudge < map.b()) push_value(x + nudge);
    } else {
      push_value(x);
    }
  }
  for (double s : samples)
    if (!std::isfinite(s)) throw NonFiniteDerivative("1/f' non-finite");
  // dp[i] = max over earlier sample j of dp[j] + |g_i - g_j|^p.
  const std::size_t m = samples.size();
  std::vector<double> dp(m, 0.0);
  double best = 0.0;
  for (std::size_t i = 1; i < m; ++i) {
    double bi = 0.0;
    for (std::size_t j = 0; j < i; ++j) {
      const double cand = dp[j] + std::pow(std::fabs(samples[i] - samples[j]), p);
      bi = std::max(bi, cand);
    }
    dp[i] = bi;
    best = std::max(best, bi);
  }
  return std::pow(best, alpha);
}

/// Explicit diffeomorphism candidate for the map distance d(f1, f2).
struct Diffeo {
  std::function<double(double)> forward;
  std::function<double(double)> derivative;
};

/// Certified upper bound for d(f1, f2), given sigma with f2 = f1 ∘ sigma on A:
/// max of the (relative) measure deficiency of A, sup_A |sigma(x) - x| and
/// sup_A |1/sigma'(x) - 1|.
inline double map_distance_upper(const PiecewiseExpandingMap& f1, const PiecewiseExpandingMap& f2,
                                 const Diffeo& sigma,
                                 const std::vector<std::pair<double, double>>& A,
                                 std::size_t samples_per_interval = 4096) {
  const double len = f1.length();
  double measA = 0.0, sup_shift = 0.0, sup_dil = 0.0;
  for (const auto& [lo, hi] : A) {
    if (hi <= lo) throw BadParameters("map_distance_upper: empty subinterval");
    measA += hi - lo;
    for (std::size_t i = 0; i < samples_per_interval; ++i) {
      const double x = lo + (static_cast<double>(i) + 0.5) * (hi - lo) /
                                static_cast<double>(samples_per_interval);
      const double sx = sigma.forward(x);
      if (f2.is_cut_point(x) || f1.is_cut_point(sx)) continue;
      if (std::fabs(eval(f2, x) - eval(f1, sx)) > 1e-9)
        throw ConjugacyViolation("f2 != f1∘sigma on A beyond tolerance");
      sup_shift = std::max(sup_shift, std::fabs(sx - x));
      const double dsx = sigma.derivative(x);
      const double dil = dsx == 0.0 ? std::numeric_limits<double>::infinity()
                                    : std::fabs(1.0 / dsx - 1.0);
      sup_dil = std::max(sup_dil, std::min(dil, 1.0));
    }
  }
  const double deficiency = std::max(0.0, 1.0 - measA / len);
  return std::max({deficiency, sup_shift, sup_dil});
}

// --- Built-in map families -------------------------------------------------

inline PiecewiseExpandingMap make_doubling() {
  auto d2 = [](double) { return 2.0; };
  std::vector<Branch> br{
      {0.0, 0.5, [](double x) { return 2.0 * x; }, d2, +1},
      {0.5, 1.0, [](double x) { return 2.0 * x - 1.0; }, d2, +1},
  };
  return PiecewiseExpandingMap(0.0, 1.0, std::move(br), 2.0, 1.0, 0.0, "doubling");
}

/// doubling ∘ sigma with sigma(x) = x + (eps/2) sin(2 pi x):
/// f(x) = 2x + eps sin(2 pi x) mod 1, branch cuts unchanged at 1/2.
inline PiecewiseExpandingMap make_perturbed_doubling(double eps) {
  constexpr double pi = 3.14159265358979323846;
  if (eps < 0.0 || eps >= 1.0 / (2.0 * pi))
    throw BadParameters("perturbed_doubling: eps in [0, 1/(2 pi))");
  auto df = [eps](double x) { return 2.0 + 2.0 * pi * eps * std::cos(2.0 * pi * x); };
  std::vector<Branch> br{
      {0.0, 0.5, [eps](double x) { return 2.0 * x + eps * std::sin(2.0 * pi * x); }, df, +1},
      {0.5, 1.0, [eps](double x) { return 2.0 * x + eps * std::sin(2.0 * pi * x) - 1.0; }, df, +1},
  };
  const double beta = 2.0 - 2.0 * pi * eps;
  // total variation of 1/f' (monotone between the extrema of cos)
  const double c = 2.0 * (1.0 / beta - 1.0 / (2.0 + 2.0 * pi * eps));
  return PiecewiseExpandingMap(0.0, 1.0, std::move(br), beta, 1.0, c, "perturbed_doubling",
                               {{"eps", eps}});
}

inline PiecewiseExpandingMap make_tent() {
  std::vector<Branch> br{
      {0.0, 0.5, [](double x) { return 2.0 * x; }, [](double) { return 2.0; }, +1},
      {0.5, 1.0, [](double x) { return 2.0 - 2.0 * x; }, [](double) { return -2.0; }, -1},
  };
  return PiecewiseExpandingMap(0.0, 1.0, std::move(br), 2.0, 1.0, 0.0, "tent");
}

/// Piecewise linear map with branch i on [cut_i, cut_{i+1}) given by
/// f(x) = slope_i * (x - cut_i) + offset_i (offsets default to 0).
inline PiecewiseExpandingMap make_markov_pw_linear(const std::vector<double>& slopes,
                                                   const std::vector<double>& cuts,
                                                   const std::vector<double>& offsets = {}) {
  if (cuts.size() != slopes.size() + 1)
    throw BadParameters("markov_pw_linear: need cuts.size() == slopes.size()+1");
  std::vector<Branch> br;
  double beta = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < slopes.size(); ++i) {
    const double s = slopes[i];
    const double off = i < offsets.size() ? offsets[i] : 0.0;
    const double lo = cuts[i];
    if (std::fabs(s) <= 1.0) throw BadParameters("markov_pw_linear: |slope| must exceed 1");
    br.push_back({lo, cuts[i + 1], [s, off, lo](double x) { return s * (x - lo) + off; },
                  [s](double) { return s; }, s > 0 ? +1 : -1});
    beta = std::min(beta, std::fabs(s));
  }
  double c = 0.0;  // exact total variation of 1/|f'| (junction jumps)
  for (std::size_t i = 0; i + 1 < slopes.size(); ++i)
    c += std::fabs(1.0 / std::fabs(slopes[i + 1]) - 1.0 / std::fabs(slopes[i]));
  return PiecewiseExpandingMap(cuts.front(), cuts.back(), std::move(br), beta, 1.0, c,
                               "markov_pw_linear",
                               {{"slopes", slopes}, {"cuts", cuts}, {"offsets", offsets}});
}

/// The canonical Lorenz quotient family on [-1,1]:
/// f(u) = sgn(u) (2|u|^theta - 1), theta in (1/2, 1).
/// beta = 2 theta, alpha = 1 - theta, V_{1/alpha}(1/f') = 2^alpha / (2 theta).
inline PiecewiseExpandingMap make_lorenz_theta(double theta) {
  if (!(theta > 0.5 && theta < 1.0)) throw BadParameters("lorenz_theta: theta in (1/2, 1)");
  auto df = [theta](double u) {
    const double au = std::fabs(u);
    return au == 0.0 ? std::numeric_limits<double>::infinity()
                     : 2.0 * theta * std::pow(au, theta - 1.0);
  };
  std::vector<Branch> br{
      {-1.0, 0.0, [theta](double u) { return 1.0 - 2.0 * std::pow(-u, theta); }, df, +1},
      {0.0, 1.0, [theta](double u) { return 2.0 * std::pow(u, theta) - 1.0; }, df, +1},
  };
  const double alpha = 1.0 - theta;
  const double c = std::pow(2.0, alpha) / (2.0 * theta);
  return PiecewiseExpandingMap(-1.0, 1.0, std::move(br), 2.0 * theta, alpha, c, "lorenz_theta",
                               {{"theta", theta}});
}

inline PiecewiseExpandingMap map_from_json(const nlohmann::json& doc) {
  const std::string family = doc.at("family").get<std::string>();
  const auto params = doc.value("params", nlohmann::json::object());
  if (family == "doubling") return make_doubling();
  if (family == "perturbed_doubling") return make_perturbed_doubling(params.at("eps").get<double>());
  if (family == "tent") return make_tent();
  if (family == "markov_pw_linear")
    return make_markov_pw_linear(params.at("slopes").get<std::vector<double>>(),
                                 params.at("cuts").get<std::vector<double>>(),
                                 params.value("offsets", std::vector<double>{}));
  if (family == "lorenz_theta") return make_lorenz_theta(params.at("theta").get<double>());
  throw BadParameters("unknown map family: " + family);
}

inline nlohmann::json map_descriptor(const PiecewiseExpandingMap& map) {
  return {{"family", map.family()},      {"params", map.params()},
          {"interval", {map.a(), map.b()}}, {"cuts", map.cut_points()},
          {"beta", map.beta()},          {"alpha", map.alpha()},
          {"var_bound", map.var_bound()}};
}

// --- Iterated maps ---------------------------------------------------------

/// Sorted cut points of f^k: C_1 = cuts(f), C_{j+1} = cuts(f) ∪ f^{-1}(C_j).
inline std::vector<double> cut_points_of_iterate(const PiecewiseExpandingMap& map, int k) {
  std::vector<double> cur(map.cut_points());
  for (int j = 1; j < k; ++j) {
    std::vector<double> next(map.cut_points());
    for (double c : cur)
      for (const auto& p : preimages(map, c)) next.push_back(p.x);
    std::sort(next.begin(), next.end());
    next.erase(std::unique(next.begin(), next.end(),
                           [](double x, double y) { return std::fabs(x - y) < 1e-11; }),
               next.end());
    cur = std::move(next);
  }
  return cur;
}

/// |I_{m,k}|: smallest smoothness interval of f^k.
inline double min_branch_length_of_iterate(const PiecewiseExpandingMap& map, int k) {
  const auto cuts = cut_points_of_iterate(map, k);
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) m = std::min(m, cuts[i + 1] - cuts[i]);
  return m;
}

/// f^k as a PiecewiseExpandingMap. Branch endpoints are evaluated exactly by
/// replaying the branch sequence of each cylinder's midpoint (the branch
/// formulas extend continuously to closures).
inline PiecewiseExpandingMap compose_map(const PiecewiseExpandingMap& map, int k) {
  if (k < 1) throw BadParameters("compose_map: k >= 1");
  const auto cuts = cut_points_of_iterate(map, k);
  std::vector<Branch> out;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double lo = cuts[i], hi = cuts[i + 1];
    double xm = 0.5 * (lo + hi);
    std::vector<const Branch*> seq;
    for (int j = 0; j < k; ++j) {
      const Branch& br = map.branch_containing(xm);
      seq.push_back(&br);
      xm = br.forward(xm);
    }
    auto fwd = [seq](double x) {
      for (const Branch* b : seq) x = b->forward(x);
      return x;
    };
    auto der = [seq](double x) {
      double d = 1.0;
      for (const Branch* b : seq) {
        d *= b->derivative(x);
        x = b->forward(x);
      }
      return d;
    };
    int orient = 1;
    for (const Branch* b : seq) orient *= b->orientation;
    out.push_back({lo, hi, fwd, der, orient});
  }
  const double beta_k = std::pow(map.beta(), k);
  const double var_k =
      static_cast<double>(k) / std::pow(map.beta(), k - 1) * std::max(map.var_bound(), 1e-300);
  return PiecewiseExpandingMap(map.a(), map.b(), std::move(out), beta_k, map.alpha(), var_k,
                               map.family() + "^" + std::to_string(k), map.params());
}

}  // namespace statstab
