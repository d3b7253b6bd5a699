#include "svlab/spline.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_spline.h>

#include <algorithm>

#include "svlab/errors.hpp"

namespace svlab::grid {

struct Spline::Impl {
  gsl_spline* s = nullptr;
  ~Impl() {
    if (s) gsl_spline_free(s);
  }
};

Spline::Spline(const std::vector<double>& x, const std::vector<double>& y, Parity parity)
    : p_(std::make_unique<Impl>()) {
  if (x.size() != y.size() || x.size() < 3 || x.front() != 0.0)
    throw Error(ErrorKind::invalid_mesh, "spline needs matching samples starting at 0");
  gsl_set_error_handler_off();
  const std::size_t n = x.size();
  std::vector<double> xx(2 * n - 1), yy(2 * n - 1);
  const double sgn = parity == Parity::even ? 1.0 : -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    xx[n - 1 + i] = x[i];
    yy[n - 1 + i] = y[i];
    xx[n - 1 - i] = -x[i];
    yy[n - 1 - i] = sgn * y[i];
  }
  if (parity == Parity::odd) yy[n - 1] = 0.0;
  p_->s = gsl_spline_alloc(gsl_interp_cspline, xx.size());
  if (gsl_spline_init(p_->s, xx.data(), yy.data(), xx.size()) != GSL_SUCCESS)
    throw Error(ErrorKind::invalid_mesh, "spline construction failed");
  xmax_ = x.back();
}

Spline::~Spline() = default;
Spline::Spline(Spline&&) noexcept = default;
Spline& Spline::operator=(Spline&&) noexcept = default;

double Spline::operator()(double x) const {
  x = std::clamp(x, 0.0, xmax_);
  return gsl_spline_eval(p_->s, x, nullptr);
}

double Spline::deriv(double x) const {
  x = std::clamp(x, 0.0, xmax_);
  return gsl_spline_eval_deriv(p_->s, x, nullptr);
}

}  // namespace svlab::grid
