#pragma once

#include <cmath>
#include <functional>

#include "hsim/flux.hpp"

namespace testing {

/// amplitude * sin(2 pi k z_axis).
inline hsim::TrigPoly sine(double amplitude = 1.0, int k = 1, int axis = 0) {
  hsim::TrigPoly p;
  hsim::TrigPoly::Term t;
  t.k[axis] = k;
  t.sin_amp = amplitude;
  p.terms.push_back(t);
  return p;
}

/// Composite Simpson rule on [a, b] with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

}  // namespace testing
