#pragma once

#include <cmath>
#include <cstddef>

namespace contestopt {

namespace detail {

// 20-point Gauss-Legendre nodes/weights on [-1, 1] (positive half; symmetric).
inline constexpr double kGL20Nodes[10] = {
    0.0765265211334973, 0.2277858511416451, 0.3737060887154196,
    0.5108670019508271, 0.6360536807265150, 0.7463319064601508,
    0.8391169718222188, 0.9122344282513259, 0.9639719272779138,
    0.9931285991850949};
inline constexpr double kGL20Weights[10] = {
    0.1527533871307258, 0.1491729864726037, 0.1420961093183820,
    0.1316886384491766, 0.1181945319615184, 0.1019301198172404,
    0.0832767415767048, 0.0626720483341091, 0.0406014298003869,
    0.0176140071391521};

template <typename F>
double gauss20(const F& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double s = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double dx = h * kGL20Nodes[i];
    s += kGL20Weights[i] * (f(c + dx) + f(c - dx));
  }
  return s * h;
}

template <typename F>
double adaptive(const F& f, double a, double b, double whole, double tol,
                int depth) {
  const double m = 0.5 * (a + b);
  const double left = gauss20(f, a, m);
  const double right = gauss20(f, m, b);
  const double delta = left + right - whole;
  if (std::abs(delta) <= tol || depth >= 48) return left + right;
  return adaptive(f, a, m, left, 0.5 * tol, depth + 1) +
         adaptive(f, m, b, right, 0.5 * tol, depth + 1);
}

}  // namespace detail

// Adaptive Gauss-Legendre integral of f over [a, b].
template <typename F>
double integrate(const F& f, double a, double b, double tol = 1e-12) {
  if (!(a < b)) return 0.0;
  return detail::adaptive(f, a, b, detail::gauss20(f, a, b), tol, 0);
}

}  // namespace contestopt
