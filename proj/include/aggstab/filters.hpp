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

#ifndef AGGSTAB_FILTERS_HPP_
#define AGGSTAB_FILTERS_HPP_

#include <complex>
#include <vector>

#include "aggstab/graph.hpp"

namespace aggstab {

// Polynomial spectral filter f(l) = sum_k h_k l^k.
class PolyFilter {
 public:
  PolyFilter() : coeffs_{0.0} {}
  explicit PolyFilter(std::vector<double> coeffs);

  const std::vector<double>& coeffs() const { return coeffs_; }
  int order() const { return static_cast<int>(coeffs_.size()) - 1; }
  int size() const { return static_cast<int>(coeffs_.size()); }

  double operator()(double lambda) const;
  double Derivative(double lambda) const;
  std::complex<double> operator()(std::complex<double> z) const;

  // Copy zero-padded (or validated) to exactly `length` coefficients.
  PolyFilter Padded(int length) const;

 private:
  std::vector<double> coeffs_;
};

double EvalPoly(const PolyFilter& f, double lambda);

// sum_k h_k S^k by Horner's scheme on matrices.
Matrix EvalPolyMatrix(const PolyFilter& f, const Matrix& s);

// h'_k = h_{(k - m) mod (a+1)}: the coefficient vector of l^m f(l) reduced
// modulo (l^{a+1} - 1).
PolyFilter CyclicShiftCoeffs(const PolyFilter& f, int m);

// Diagnostic only: the quotient-term form
//   l^m f(l) - (l^{a+1} - 1) sum_{r=0}^{m} h_{a-r} l^{m-r}
// expanded as a full polynomial. It does not reduce to f at m = 0 and is never
// used for bounds; see CyclicShiftCoeffs for the reduction used everywhere else.
PolyFilter PrintedShiftPolynomial(const PolyFilter& f, int m);

// Closed real interval sampled at grid_points + 1 equispaced points
// (grid_points cells, endpoints included), so doubling grid_points refines
// the sample set.
struct Omega {
  double lo = -1.0;
  double hi = 1.0;
  int grid_points = 2048;

  void Validate() const;
  double At(int j) const { return lo + (hi - lo) * static_cast<double>(j) / grid_points; }
  int SampleCount() const { return grid_points + 1; }
  bool Contains(double lambda) const { return lambda >= lo && lambda <= hi; }
};

// [-(1+margin) r, (1+margin) r] with r = radius, falling back to [-1, 1] for r = 0.
Omega SymmetricOmega(double radius, double margin = 0.05, int grid_points = 2048);

// Interval covering the spectrum of S and of every S + T0 + T1 S with
// ||T0|| <= max_t0 and ||T1|| <= max_t1 (norm bound ||S|| + t0 + t1 ||S||).
Omega CoveringOmega(const Matrix& s, double max_t0, double max_t1, double margin = 0.05,
                    int grid_points = 2048);

struct LipschitzEstimate {
  double l0 = 0.0;  // sup |p_m'(l)|
  double l1 = 0.0;  // sup |l p_m'(l)|
  int grid_points = 0;
  double omega_lo = 0.0;
  double omega_hi = 0.0;
};

LipschitzEstimate EstimateLipschitz(const PolyFilter& f, const Omega& omega,
                                    bool include_shifts = true);

// Maximum of the per-filter estimates (a filter bank is as smooth as its worst member).
LipschitzEstimate EstimateLipschitz(const std::vector<PolyFilter>& bank, const Omega& omega,
                                    bool include_shifts = true);

struct Certification {
  bool pass = false;
  LipschitzEstimate estimate;
};

Certification CertifyFilter(const PolyFilter& f, const Omega& omega, double l0_max,
                            double l1_max);

// (a+1)x(a+1) circulant sum_k h_k C^k with C e_i = e_{i+1 mod (a+1)}.
// `length` zero-pads the filter; 0 means the filter's own length.
Matrix CirculantFromCoeffs(const PolyFilter& f, int length = 0);

// f(w^k), w = exp(2 pi i / length), k = 0..length-1.
std::vector<std::complex<double>> CirculantEigenvalues(const PolyFilter& f, int length = 0);

// Frechet derivative of S -> f(S) at symmetric S in direction xi, through
// divided differences of the eigenvalues of S.
Matrix FrechetDerivativePoly(const PolyFilter& f, const Matrix& s, const Matrix& xi);

// Central difference (f(S + t xi) - f(S - t xi)) / 2t.
Matrix FrechetFdOracle(const PolyFilter& f, const Matrix& s, const Matrix& xi, double t);

struct StabilityBound {
  double c0 = 0.0;
  double c1 = 0.0;
  double total = 0.0;
  double layer_product = 1.0;
};

// c0 = n sqrt(a+1) L0, c1 = n sqrt(a+1) L1, total = c0 t0 + c1 t1.
StabilityBound ComputeStabilityBound(int n, int a, double l0, double l1, double t0_norm,
                                     double t1_norm);

// Scales the total by the product of deeper-layer operator norms.
StabilityBound MultilayerBound(const StabilityBound& base, const std::vector<double>& layer_norms);

}  // namespace aggstab

#endif  // AGGSTAB_FILTERS_HPP_
