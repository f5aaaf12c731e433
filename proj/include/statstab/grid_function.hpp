#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "statstab/errors.hpp"

namespace statstab {

/// Piecewise-constant function on a uniform partition of [a,b].
/// Cell i covers [a + i*w, a + (i+1)*w) with w = (b-a)/n.
class GridFunction {
 public:
  GridFunction() = default;
  GridFunction(double a, double b, std::vector<double> values)
      : a_(a), b_(b), values_(std::move(values)) {
    if (b_ <= a_ || values_.size() < 2)
      throw BadParameters("GridFunction: need b > a and at least 2 cells");
    for (double v : values_)
      if (!std::isfinite(v)) throw BadParameters("GridFunction: non-finite value");
  }

  static GridFunction constant(double a, double b, std::size_t n, double c) {
    return GridFunction(a, b, std::vector<double>(n, c));
  }

  /// Midpoint sampling of an arbitrary function.
  static GridFunction sample(double a, double b, std::size_t n,
                             const std::function<double(double)>& f) {
    std::vector<double> v(n);
    const double w = (b - a) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = f(a + (static_cast<double>(i) + 0.5) * w);
    return GridFunction(a, b, std::move(v));
  }

  static GridFunction indicator(double a, double b, std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    const double w = (b - a) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double m = a + (static_cast<double>(i) + 0.5) * w;
      v[i] = (m > lo && m < hi) ? 1.0 : 0.0;
    }
    return GridFunction(a, b, std::move(v));
  }

  double a() const { return a_; }
  double b() const { return b_; }
  std::size_t n_cells() const { return values_.size(); }
  double width() const { return (b_ - a_) / static_cast<double>(values_.size()); }
  double midpoint(std::size_t i) const { return a_ + (static_cast<double>(i) + 0.5) * width(); }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::size_t cell_index(double x) const {
    const double t = (x - a_) / width();
    auto i = static_cast<long>(std::floor(t));
    i = std::clamp<long>(i, 0, static_cast<long>(values_.size()) - 1);
    return static_cast<std::size_t>(i);
  }

  /// Value of the piecewise-constant representative at x (clamped to [a,b]).
  double at(double x) const { return values_[cell_index(x)]; }

  double integral() const {
    double s = 0.0;
    for (double v : values_) s += v;
    return s * width();
  }

  double l1_norm() const {
    double s = 0.0;
    for (double v : values_) s += std::fabs(v);
    return s * width();
  }

  double linf_norm() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::fabs(v));
    return m;
  }

  GridFunction& operator*=(double c) {
    for (double& v : values_) v *= c;
    return *this;
  }

  friend GridFunction operator-(const GridFunction& f, const GridFunction& g) {
    if (f.n_cells() != g.n_cells() || f.a_ != g.a_ || f.b_ != g.b_)
      throw BadParameters("GridFunction: mismatched grids");
    std::vector<double> v(f.n_cells());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = f.values_[i] - g.values_[i];
    return GridFunction(f.a_, f.b_, std::move(v));
  }

  friend GridFunction operator+(const GridFunction& f, const GridFunction& g) {
    if (f.n_cells() != g.n_cells() || f.a_ != g.a_ || f.b_ != g.b_)
      throw BadParameters("GridFunction: mismatched grids");
    std::vector<double> v(f.n_cells());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = f.values_[i] + g.values_[i];
    return GridFunction(f.a_, f.b_, std::move(v));
  }

 private:
  double a_ = 0.0, b_ = 1.0;
  std::vector<double> values_;
};

inline double l1_distance(const GridFunction& f, const GridFunction& g) {
  return (f - g).l1_norm();
}

}  // namespace statstab
