// Copyright 2026 The aggstab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "aggstab/filters.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "aggstab/error.hpp"

namespace aggstab {

PolyFilter::PolyFilter(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
  if (coeffs_.empty()) Fail("filter needs at least one coefficient");
  for (double c : coeffs_) {
    if (!std::isfinite(c)) Fail("filter coefficient is not finite");
  }
}

double PolyFilter::operator()(double lambda) const {
  double acc = 0.0;
  for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * lambda + *it;
  return acc;
}

double PolyFilter::Derivative(double lambda) const {
  double acc = 0.0;
  for (int k = order(); k >= 1; --k) acc = acc * lambda + k * coeffs_[k];
  return acc;
}

std::complex<double> PolyFilter::operator()(std::complex<double> z) const {
  std::complex<double> acc = 0.0;
  for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * z + *it;
  return acc;
}

PolyFilter PolyFilter::Padded(int length) const {
  if (length < size()) {
    Fail("filter has " + std::to_string(size()) + " taps, more than the " +
         std::to_string(length) + " available");
  }
  std::vector<double> c = coeffs_;
  c.resize(length, 0.0);
  return PolyFilter(std::move(c));
}

double EvalPoly(const PolyFilter& f, double lambda) { return f(lambda); }

Matrix EvalPolyMatrix(const PolyFilter& f, const Matrix& s) {
  if (s.rows() != s.cols()) Fail("polynomial of a non-square matrix");
  const auto n = s.rows();
  const auto& h = f.coeffs();
  Matrix acc = h.back() * Matrix::Identity(n, n);
  for (int k = f.order() - 1; k >= 0; --k) {
    Matrix next = acc * s;
    next.diagonal().array() += h[k];
    acc = std::move(next);
  }
  return acc;
}

PolyFilter CyclicShiftCoeffs(const PolyFilter& f, int m) {
  if (m < 0) Fail("cyclic shift must be nonnegative");
  const int len = f.size();
  const int shift = m % len;
  std::vector<double> out(len);
  for (int k = 0; k < len; ++k) out[k] = f.coeffs()[((k - shift) % len + len) % len];
  return PolyFilter(std::move(out));
}

PolyFilter PrintedShiftPolynomial(const PolyFilter& f, int m) {
  const int a = f.order();
  if (m < 0 || m > a) Fail("printed shift polynomial defined for 0 <= m <= a");
  const auto& h = f.coeffs();
  std::vector<double> out(a + m + 2, 0.0);
  for (int k = 0; k <= a; ++k) out[k + m] += h[k];
  for (int r = 0; r <= m; ++r) {
    const double c = h[a - r];
    out[m - r + a + 1] -= c;
    out[m - r] += c;
  }
  return PolyFilter(std::move(out));
}

void Omega::Validate() const {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) Fail("omega needs lo < hi");
  if (grid_points < 2) Fail("omega needs at least 2 grid points");
}

Omega SymmetricOmega(double radius, double margin, int grid_points) {
  const double r = radius > 0.0 ? (1.0 + margin) * radius : 1.0;
  Omega omega{-r, r, grid_points};
  omega.Validate();
  return omega;
}

Omega CoveringOmega(const Matrix& s, double max_t0, double max_t1, double margin,
                    int grid_points) {
  const double norm = SpectralNorm(s);
  return SymmetricOmega(norm + max_t0 + max_t1 * norm, margin, grid_points);
}

LipschitzEstimate EstimateLipschitz(const PolyFilter& f, const Omega& omega, bool include_shifts) {
  omega.Validate();
  LipschitzEstimate est;
  est.grid_points = omega.grid_points;
  est.omega_lo = omega.lo;
  est.omega_hi = omega.hi;
  const int shifts = include_shifts ? f.size() : 1;
  for (int m = 0; m < shifts; ++m) {
    const PolyFilter p = CyclicShiftCoeffs(f, m);
    for (int j = 0; j < omega.SampleCount(); ++j) {
      const double lambda = omega.At(j);
      const double d = std::abs(p.Derivative(lambda));
      est.l0 = std::max(est.l0, d);
      est.l1 = std::max(est.l1, std::abs(lambda) * d);
    }
  }
  return est;
}

LipschitzEstimate EstimateLipschitz(const std::vector<PolyFilter>& bank, const Omega& omega,
                                    bool include_shifts) {
  omega.Validate();
  LipschitzEstimate est{0.0, 0.0, omega.grid_points, omega.lo, omega.hi};
  for (const auto& f : bank) {
    const auto e = EstimateLipschitz(f, omega, include_shifts);
    est.l0 = std::max(est.l0, e.l0);
    est.l1 = std::max(est.l1, e.l1);
  }
  return est;
}

Certification CertifyFilter(const PolyFilter& f, const Omega& omega, double l0_max,
                            double l1_max) {
  if (!(l0_max >= 0.0) || !(l1_max >= 0.0)) Fail("certification targets must be nonnegative");
  Certification c;
  c.estimate = EstimateLipschitz(f, omega, /*include_shifts=*/true);
  c.pass = c.estimate.l0 <= l0_max && c.estimate.l1 <= l1_max;
  return c;
}

Matrix CirculantFromCoeffs(const PolyFilter& f, int length) {
  const PolyFilter g = length == 0 ? f : f.Padded(length);
  const int n = g.size();
  Matrix h(n, n);
  for (int q = 0; q < n; ++q)
    for (int k = 0; k < n; ++k) h(q, k) = g.coeffs()[((q - k) % n + n) % n];
  return h;
}

std::vector<std::complex<double>> CirculantEigenvalues(const PolyFilter& f, int length) {
  const PolyFilter g = length == 0 ? f : f.Padded(length);
  const int n = g.size();
  std::vector<std::complex<double>> out(n);
  for (int k = 0; k < n; ++k) {
    out[k] = g(std::polar(1.0, 2.0 * std::numbers::pi * k / n));
  }
  return out;
}

Matrix FrechetDerivativePoly(const PolyFilter& f, const Matrix& s, const Matrix& xi) {
  if (xi.rows() != s.rows() || xi.cols() != s.cols()) Fail("direction size mismatch");
  const SpectralDecomposition eig = EigendecomposeSymmetric(s);
  const Vector& lam = eig.eigenvalues;
  const Matrix& v = eig.eigenvectors;
  const auto n = lam.size();
  Vector fl(n);
  for (Eigen::Index r = 0; r < n; ++r) fl(r) = f(lam(r));
  Matrix z(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) {
      const double gap = lam(r) - lam(c);
      z(r, c) = std::abs(gap) <= 1e-10 * (1.0 + std::abs(lam(r))) ? f.Derivative(lam(r))
                                                                   : (fl(r) - fl(c)) / gap;
    }
  }
  const Matrix inner = (v.transpose() * xi * v).cwiseProduct(z);
  return v * inner * v.transpose();
}

Matrix FrechetFdOracle(const PolyFilter& f, const Matrix& s, const Matrix& xi, double t) {
  if (!(t > 0.0)) Fail("finite-difference step must be positive");
  if (xi.rows() != s.rows() || xi.cols() != s.cols()) Fail("direction size mismatch");
  return (EvalPolyMatrix(f, s + t * xi) - EvalPolyMatrix(f, s - t * xi)) / (2.0 * t);
}

StabilityBound ComputeStabilityBound(int n, int a, double l0, double l1, double t0_norm,
                                     double t1_norm) {
  if (n < 1 || a < 0) Fail("stability bound needs n >= 1 and a >= 0");
  if (!(l0 >= 0.0 && l1 >= 0.0 && t0_norm >= 0.0 && t1_norm >= 0.0)) {
    Fail("stability bound inputs must be nonnegative");
  }
  StabilityBound b;
  const double scale = n * std::sqrt(static_cast<double>(a) + 1.0);
  b.c0 = scale * l0;
  b.c1 = scale * l1;
  b.total = b.c0 * t0_norm + b.c1 * t1_norm;
  return b;
}

StabilityBound MultilayerBound(const StabilityBound& base, const std::vector<double>& layer_norms) {
  StabilityBound out = base;
  double product = 1.0;
  for (double b : layer_norms) {
    if (!(b >= 0.0)) Fail("layer norm must be nonnegative");
    product *= b;
  }
  out.layer_product = base.layer_product * product;
  out.total = base.total * product;
  return out;
}

}  // namespace aggstab
