#pragma once

// Independent reference computations used to freeze expected values in
// tests. These deliberately avoid the library's own code paths.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration on P_n.
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      double dp = n * (t * p1 - p0) / (t * t - 1.0);
      double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    double p0 = 1.0, p1 = t;
    for (int k = 2; k <= n; ++k) {
      double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    double dp = n * (t * p1 - p0) / (t * t - 1.0);
    x[i] = t;
    w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
  }
}

// Quadrature over the unit sphere, exact for polynomials in (x,y,z) up to
// combined degree ~2*n_theta-1.
inline double sphere_integral(const std::function<double(const Eigen::Vector3d&)>& f,
                              int n_theta = 24, int n_phi = 48) {
  std::vector<double> ct, wt;
  gauss_legendre(n_theta, ct, wt);
  double acc = 0.0;
  for (int i = 0; i < n_theta; ++i) {
    const double c = ct[i], s = std::sqrt(1.0 - c * c);
    double ring = 0.0;
    for (int j = 0; j < n_phi; ++j) {
      const double phi = 2.0 * M_PI * j / n_phi;
      ring += f(Eigen::Vector3d(s * std::cos(phi), s * std::sin(phi), c));
    }
    acc += wt[i] * ring * (2.0 * M_PI / n_phi);
  }
  return acc;
}

// Central finite difference of a scalar function of one coordinate.
inline double central_diff(const std::function<double(double)>& f, double x0, double h) {
  return (f(x0 + h) - f(x0 - h)) / (2.0 * h);
}

// Relative error with a floor that keeps near-zero comparisons meaningful.
inline double rel_err(double a, double b, double floor_v = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor_v});
}

// Brute-force enumeration of selection-rule-legal depth-wise paths for
// (mul,l) block lists; returns count. Mirrors nothing in the library --
// plain loops over channels and degrees.
inline int count_dtp_paths(const std::vector<std::pair<int, int>>& in1,
                           const std::vector<std::pair<int, int>>& in2, int l_max) {
  int count = 0;
  for (const auto& [mul1, l1] : in1)
    for (int c1 = 0; c1 < mul1; ++c1)
      for (const auto& [mul2, l2] : in2)
        for (int c2 = 0; c2 < mul2; ++c2)
          for (int l3 = std::abs(l1 - l2); l3 <= l1 + l2; ++l3)
            if (l3 <= l_max) ++count;
  return count;
}

}  // namespace oracle
