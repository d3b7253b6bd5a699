#pragma once

#include <memory>
#include <vector>

namespace svlab::grid {

/// Natural cubic spline through (x, y) on [0, x_max], built on the reflected
/// node set so that the parity of the profile at r = 0 is respected.
class Spline {
 public:
  enum class Parity { even, odd };
  Spline(const std::vector<double>& x, const std::vector<double>& y, Parity parity);
  ~Spline();
  Spline(Spline&&) noexcept;
  Spline& operator=(Spline&&) noexcept;
  Spline(const Spline&) = delete;
  Spline& operator=(const Spline&) = delete;

  double x_max() const { return xmax_; }
  /// Valid for 0 ≤ x ≤ x_max; thread safe.
  double operator()(double x) const;
  double deriv(double x) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> p_;
  double xmax_ = 0.0;
};

}  // namespace svlab::grid
