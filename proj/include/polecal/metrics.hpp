#ifndef POLECAL_METRICS_HPP
#define POLECAL_METRICS_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "polecal/cloud.hpp"
#include "polecal/error.hpp"
#include "polecal/geometry.hpp"

namespace polecal {

/// Height-averaged deviation of a fitted near-vertical line from the
/// z-axis. `Sum` integrates the squared axis distance x(z)^2 + y(z)^2;
/// `Product` integrates x(z)^2 * y(z)^2 instead.
enum class AxisFitIntegrand { Sum, Product };

namespace detail {

/// Mean of a polynomial (coefficients low to high) over [a, b].
inline double polynomial_mean(const std::vector<double>& coeffs, double a,
                              double b) {
  double total = 0.0;
  double pa = a;
  double pb = b;
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    total += coeffs[k] * (pb - pa) / static_cast<double>(k + 1);
    pa *= a;
    pb *= b;
  }
  return total / (b - a);
}

}  // namespace detail

/// Closed-form axis-fit error of `fitted` against the z-axis over the
/// height window [z_min, z_max].
inline double axis_fit_error(const Line3& fitted, double z_min, double z_max,
                             AxisFitIntegrand integrand = AxisFitIntegrand::Sum) {
  if (!(z_min < z_max)) {
    throw Error(ErrorCode::InvalidArgument, "axis fit window must be nonempty");
  }
  const Vec3& n = fitted.direction();
  const Vec3& p = fitted.anchor();
  if (std::abs(n.z()) < 1e-12) {
    throw Error(ErrorCode::DegenerateGeometry,
                "axis fit: fitted line is horizontal");
  }
  // Reparameterize by height: x(z) = alpha + beta z, y(z) = gamma + delta z.
  const double beta = n.x() / n.z();
  const double delta = n.y() / n.z();
  const double alpha = p.x() - beta * p.z();
  const double gamma = p.y() - delta * p.z();

  if (integrand == AxisFitIntegrand::Sum) {
    return detail::polynomial_mean(
        {alpha * alpha + gamma * gamma,
         2.0 * (alpha * beta + gamma * delta),
         beta * beta + delta * delta},
        z_min, z_max);
  }
  // (x y)(z) is quadratic; square it for the quartic integrand.
  const double c0 = alpha * gamma;
  const double c1 = alpha * delta + beta * gamma;
  const double c2 = beta * delta;
  return detail::polynomial_mean(
      {c0 * c0, 2.0 * c0 * c1, c1 * c1 + 2.0 * c0 * c2, 2.0 * c1 * c2, c2 * c2},
      z_min, z_max);
}

namespace detail {

inline double adaptive_simpson(const std::function<double(double)>& f, double a,
                               double b, double fa, double fm, double fb,
                               double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a,
                        double b, double tol) {
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 50);
}

}  // namespace detail

/// Range-averaged deviation between an estimated and a reference extrinsic:
/// the probe point [0, x, 0] is pushed through both transforms and the
/// mismatch distance is averaged over x in [near, far].
inline double extrinsic_error(const RigidTransform& result,
                              const RigidTransform& ground_truth,
                              double near = 1.0, double far = 60.0) {
  if (!(near < far)) {
    throw Error(ErrorCode::InvalidArgument, "probe range must be nonempty");
  }
  const Vec3 w =
      (result.rotation.matrix() - ground_truth.rotation.matrix()) * Vec3::UnitY();
  const Vec3 d = result.translation - ground_truth.translation;
  const auto integrand = [&](double x) { return (x * w + d).norm(); };
  return detail::integrate(integrand, near, far, 1e-9) / (far - near);
}

/// Gaussian-kernel information potential of a cloud: mean over all ordered
/// point pairs of exp(-|p_i - p_j|^2 / (4 sigma^2)). Larger means crisper
/// (more self-similar) geometry; a well-aligned merged cloud scores higher
/// than a misaligned one. Kahan summation keeps the O(N^2) sum stable.
inline double rqe_score(const std::vector<Vec3>& points, double sigma = 0.05) {
  if (points.empty()) {
    throw Error(ErrorCode::InvalidArgument, "rqe needs a nonempty cloud");
  }
  if (!(sigma > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "rqe kernel sigma must be > 0");
  }
  const double inv = 1.0 / (4.0 * sigma * sigma);
  double sum = 0.0;
  double carry = 0.0;
  const std::size_t n = points.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double term = std::exp(-(points[i] - points[j]).squaredNorm() * inv);
      const double y = term - carry;
      const double t = sum + y;
      carry = (t - sum) - y;
      sum = t;
    }
  }
  // Diagonal terms are exp(0) = 1, off-diagonal pairs count twice.
  const double nn = static_cast<double>(n);
  return (nn + 2.0 * sum) / (nn * nn);
}

inline double rqe_score(const PointCloud& cloud, double sigma = 0.05) {
  return rqe_score(cloud.points, sigma);
}

}  // namespace polecal

#endif  // POLECAL_METRICS_HPP
