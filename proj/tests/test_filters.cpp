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

#include <cmath>
#include <complex>

#include "aggstab/filters.hpp"
#include "aggstab/rng.hpp"
#include "doctest.h"
#include "test_util.hpp"

namespace aggstab {
namespace {

using testing::MaxAbs;
using testing::Path3;
using testing::Swap2;

Matrix RandomSym(int n, Rng& rng) {
  std::normal_distribution<double> g;
  Matrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k <= i; ++k) m(i, k) = m(k, i) = g(rng);
  return m;
}

PolyFilter RandomFilter(int len, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> c(len);
  for (double& v : c) v = u(rng);
  return PolyFilter(c);
}

TEST_CASE("filter construction") {
  CHECK_THROWS_AS(PolyFilter(std::vector<double>{}), Error);
  CHECK_THROWS_AS(PolyFilter({1.0, NAN}), Error);
  CHECK(PolyFilter({1, 2, 3}).order() == 2);
  CHECK(PolyFilter({1, 2}).Padded(4).coeffs() == std::vector<double>{1, 2, 0, 0});
  CHECK_THROWS_AS(PolyFilter({1, 2, 3}).Padded(2), Error);
}

TEST_CASE("scalar and matrix evaluation") {
  CHECK(EvalPoly(PolyFilter({1, 2, 3}), 0.0) == 1.0);
  CHECK(EvalPoly(PolyFilter({1, 2, 3}), 2.0) == 17.0);
  CHECK(PolyFilter({1, 2, 3}).Derivative(2.0) == 14.0);
  Rng rng(1);
  const Matrix s = RandomSym(4, rng);
  CHECK(EvalPolyMatrix(PolyFilter({0, 1}), s) == s);
  const Matrix p3 = Path3();
  CHECK(MaxAbs(EvalPolyMatrix(PolyFilter({1, 0, 1}), p3) - (Matrix::Identity(3, 3) + p3 * p3)) == 0.0);
  CHECK_THROWS_AS(EvalPolyMatrix(PolyFilter({1}), Matrix::Zero(2, 3)), Error);
}

TEST_CASE("cyclic shifts") {
  const PolyFilter f({1, 2, 3});
  CHECK(CyclicShiftCoeffs(f, 1).coeffs() == std::vector<double>{3, 1, 2});
  CHECK(CyclicShiftCoeffs(f, 0).coeffs() == f.coeffs());
  CHECK(CyclicShiftCoeffs(f, 3).coeffs() == f.coeffs());
  CHECK_THROWS_AS(CyclicShiftCoeffs(f, -1), Error);
  Rng rng(2);
  const PolyFilter g = RandomFilter(5, rng);
  for (int m1 = 0; m1 < 7; ++m1)
    for (int m2 = 0; m2 < 7; ++m2)
      CHECK(CyclicShiftCoeffs(CyclicShiftCoeffs(g, m1), m2).coeffs() ==
            CyclicShiftCoeffs(g, (m1 + m2) % 5).coeffs());
}

TEST_CASE("shift polynomial equals lambda^m f reduced mod lambda^(a+1) - 1") {
  Rng rng(3);
  const PolyFilter f = RandomFilter(4, rng);
  for (int m = 0; m < 4; ++m) {
    // At a root of unity the reduction is an identity.
    for (int k = 0; k < 4; ++k) {
      const auto w = std::polar(1.0, 2.0 * M_PI * k / 4);
      const auto lhs = CyclicShiftCoeffs(f, m)(w);
      const auto rhs = std::pow(w, m) * f(w);
      CHECK(std::abs(lhs - rhs) < 1e-13);
    }
  }
}

TEST_CASE("printed shift polynomial is off by one at m = 0") {
  const PolyFilter f({1, 2, 3});
  const PolyFilter p = PrintedShiftPolynomial(f, 0);
  for (double x : {-1.5, 0.3, 2.0}) {
    CHECK(p(x) == doctest::Approx(f(x) - (std::pow(x, 3) - 1) * 3.0));
  }
  CHECK_THROWS_AS(PrintedShiftPolynomial(f, 3), Error);
}

TEST_CASE("omega grid") {
  const Omega o{-1.0, 1.0, 4};
  CHECK(o.SampleCount() == 5);
  CHECK(o.At(0) == -1.0);
  CHECK(o.At(4) == 1.0);
  CHECK(o.At(2) == 0.0);
  CHECK_THROWS_AS((Omega{1.0, 1.0, 4}.Validate()), Error);
  CHECK_THROWS_AS((Omega{0.0, 1.0, 1}.Validate()), Error);
  const Omega cov = CoveringOmega(Swap2(), 0.1, 0.2);
  CHECK(cov.hi == doctest::Approx(1.05 * (1 + 0.1 + 0.2)));
  CHECK(cov.lo == -cov.hi);
}

TEST_CASE("lipschitz estimates") {
  const Omega unit{-1.0, 1.0, 2048};
  const auto lin = EstimateLipschitz(PolyFilter({0, 2}), unit, false);
  CHECK(lin.l0 == 2.0);
  const auto sq = EstimateLipschitz(PolyFilter({0, 0, 1}), unit, false);
  CHECK(sq.l0 == 2.0);
  CHECK(sq.l1 == 2.0);
  const auto flat = EstimateLipschitz(PolyFilter({3.5}), unit);
  CHECK(flat.l0 == 0.0);
  CHECK(flat.l1 == 0.0);
  // The shift [0, 1, 0] of lambda^2 is lambda, the shift [1, 0, 0] is flat.
  CHECK(EstimateLipschitz(PolyFilter({0, 0, 1}), unit, true).l0 == 2.0);
  CHECK(EstimateLipschitz(PolyFilter({0, 0, 3}), unit, true).l1 == 6.0);
  // [2, 0, 0] shifted once is 2 lambda.
  CHECK(EstimateLipschitz(PolyFilter({2, 0, 0}), unit, false).l0 == 0.0);
  CHECK(EstimateLipschitz(PolyFilter({2, 0, 0}), unit, true).l0 == 4.0);
}

TEST_CASE("refining the grid never lowers the estimate") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const PolyFilter f = RandomFilter(6, rng);
    double l0 = 0, l1 = 0;
    for (int grid = 16; grid <= 4096; grid *= 2) {
      const auto e = EstimateLipschitz(f, Omega{-1.3, 0.9, grid});
      CHECK(e.l0 >= l0);
      CHECK(e.l1 >= l1);
      l0 = e.l0;
      l1 = e.l1;
    }
  }
}

TEST_CASE("certification") {
  const Omega unit{-1.0, 1.0, 2048};
  const auto c = CertifyFilter(PolyFilter({0, 2}), unit, 1.0, 10.0);
  CHECK_FALSE(c.pass);
  CHECK(c.estimate.l0 == 2.0);
  CHECK(CertifyFilter(PolyFilter({0.0}), unit, 0.0, 0.0).pass);
  // lambda shifted once is the constant 1, so only m = 0 matters.
  CHECK(CertifyFilter(PolyFilter({0, 1}), Omega{-2.0, 2.0, 2048}, 1.0, 2.0).pass);
  CHECK_THROWS_AS(CertifyFilter(PolyFilter({0, 1}), unit, -1.0, 1.0), Error);
}

TEST_CASE("circulant matrices") {
  CHECK(CirculantFromCoeffs(PolyFilter({1, 0, 0})) == Matrix::Identity(3, 3));
  CHECK(CirculantFromCoeffs(PolyFilter({0, 1})) == Swap2());
  Matrix expect(3, 3);
  expect << 1, 3, 2, 2, 1, 3, 3, 2, 1;
  CHECK(CirculantFromCoeffs(PolyFilter({1, 2, 3})) == expect);
  // Equal to sum_k h_k C^k with C the cyclic delay.
  Rng rng(5);
  const PolyFilter f = RandomFilter(5, rng);
  Matrix c = Matrix::Zero(5, 5);
  for (int i = 0; i < 5; ++i) c((i + 1) % 5, i) = 1.0;
  CHECK(MaxAbs(CirculantFromCoeffs(f) - EvalPolyMatrix(f, c)) < 1e-14);
  // Column m holds the m-th cyclic shift.
  for (int m = 0; m < 5; ++m) {
    const auto p = CyclicShiftCoeffs(f, m).coeffs();
    for (int q = 0; q < 5; ++q) CHECK(CirculantFromCoeffs(f)(q, m) == p[q]);
  }
}

TEST_CASE("circulant eigenvalues") {
  const auto e = CirculantEigenvalues(PolyFilter({1, 2, 3}));
  CHECK(std::abs(e[0] - 6.0) < 1e-15);
  for (const auto& v : CirculantEigenvalues(PolyFilter({1, 0, 0}))) CHECK(std::abs(v - 1.0) < 1e-15);
  const auto d = CirculantEigenvalues(PolyFilter({0, 1}));
  CHECK(std::abs(d[0] - 1.0) < 1e-15);
  CHECK(std::abs(d[1] + 1.0) < 1e-15);
}

TEST_CASE("frechet derivative") {
  Rng rng(6);
  const Matrix s = RandomSym(4, rng);
  const Matrix xi = RandomSym(4, rng);
  CHECK(MaxAbs(FrechetDerivativePoly(PolyFilter({0, 1}), s, xi) - xi) < 1e-12);
  CHECK(MaxAbs(FrechetDerivativePoly(PolyFilter({2}), s, xi)) < 1e-12);

  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 1;
  d(1, 1) = 2;
  const PolyFilter sq({0, 0, 1});
  const Matrix got = FrechetDerivativePoly(sq, d, Swap2());
  Matrix expect(2, 2);
  expect << 0, 3, 3, 0;
  CHECK(MaxAbs(got - expect) < 1e-12);
  const Matrix one_sided = (EvalPolyMatrix(sq, d + 1e-6 * Swap2()) - EvalPolyMatrix(sq, d)) / 1e-6;
  CHECK(MaxAbs(got - one_sided) < 1e-5);
  CHECK(MaxAbs(FrechetFdOracle(sq, d, Swap2(), 1e-6) - got) < 1e-5);

  Matrix asym = Swap2();
  asym(0, 1) = 0.5;
  CHECK_THROWS_AS(FrechetDerivativePoly(sq, asym, Swap2()), Error);
}

TEST_CASE("frechet derivative with repeated eigenvalues") {
  // The identity has one eigenvalue of multiplicity 3, so every entry is a tie.
  const Matrix s = 2.0 * Matrix::Identity(3, 3);
  Rng rng(7);
  const Matrix xi = RandomSym(3, rng);
  const PolyFilter cube({0, 0, 0, 1});
  CHECK(MaxAbs(FrechetDerivativePoly(cube, s, xi) - 12.0 * xi) < 1e-12);
}

TEST_CASE("finite difference oracle") {
  Rng rng(8);
  const Matrix s = RandomSym(3, rng);
  const Matrix xi = RandomSym(3, rng);
  CHECK(MaxAbs(FrechetFdOracle(PolyFilter({0, 1}), s, xi, 0.3) - xi) < 1e-14);
  CHECK(MaxAbs(FrechetFdOracle(PolyFilter({1, 2, 3}), s, Matrix::Zero(3, 3), 1e-3)) == 0.0);
  CHECK_THROWS_AS(FrechetFdOracle(PolyFilter({0, 1}), s, xi, 0.0), Error);
}

TEST_CASE("oracle agreement shrinks with the step") {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix s = 0.5 * RandomSym(8, rng);
    const Matrix xi = RandomSym(8, rng);
    const PolyFilter f = RandomFilter(7, rng);
    const Matrix exact = FrechetDerivativePoly(f, s, xi);
    const double coarse = MaxAbs(FrechetFdOracle(f, s, xi, 1e-2) - exact);
    const double fine = MaxAbs(FrechetFdOracle(f, s, xi, 1e-3) - exact);
    CHECK(fine <= coarse / 50 + 1e-9);
  }
}

TEST_CASE("stability bound") {
  const auto b = ComputeStabilityBound(4, 3, 1.0, 0.5, 0.01, 0.02);
  CHECK(b.c0 == 8.0);
  CHECK(b.c1 == 4.0);
  CHECK(b.total == doctest::Approx(0.16).epsilon(1e-15));
  CHECK(ComputeStabilityBound(4, 3, 1.0, 0.5, 0.0, 0.0).total == 0.0);
  CHECK(ComputeStabilityBound(1, 0, 1.0, 0.0, 0.125, 0.0).total == 0.125);
  CHECK_THROWS_AS(ComputeStabilityBound(0, 3, 1.0, 0.5, 0.0, 0.0), Error);
  CHECK_THROWS_AS(ComputeStabilityBound(4, 3, -1.0, 0.5, 0.0, 0.0), Error);
  // Monotone in each argument.
  const auto base = ComputeStabilityBound(5, 2, 0.7, 0.3, 0.1, 0.2);
  CHECK(ComputeStabilityBound(6, 2, 0.7, 0.3, 0.1, 0.2).total >= base.total);
  CHECK(ComputeStabilityBound(5, 3, 0.7, 0.3, 0.1, 0.2).total >= base.total);
  CHECK(ComputeStabilityBound(5, 2, 0.8, 0.3, 0.1, 0.2).total >= base.total);
  CHECK(ComputeStabilityBound(5, 2, 0.7, 0.4, 0.1, 0.2).total >= base.total);
  CHECK(ComputeStabilityBound(5, 2, 0.7, 0.3, 0.2, 0.2).total >= base.total);
  CHECK(ComputeStabilityBound(5, 2, 0.7, 0.3, 0.1, 0.3).total >= base.total);
}

TEST_CASE("multilayer bound") {
  StabilityBound base;
  base.total = 0.16;
  CHECK(MultilayerBound(base, {2, 3}).total == doctest::Approx(0.96));
  CHECK(MultilayerBound(base, {2, 3}).layer_product == 6.0);
  CHECK(MultilayerBound(base, {}).total == 0.16);
  CHECK(MultilayerBound(base, {0}).total == 0.0);
  CHECK_THROWS_AS(MultilayerBound(base, {-1}), Error);
}

}  // namespace
}  // namespace aggstab
