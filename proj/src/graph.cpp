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

#include "aggstab/graph.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "aggstab/error.hpp"
#include "aggstab/rng.hpp"

namespace aggstab {
namespace {

void RequireFinite(const Matrix& m, const char* what) {
  if (!m.allFinite()) Fail(std::string(what) + " has a non-finite entry");
}

double MaxAsymmetry(const Matrix& m) {
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

}  // namespace

Graph Graph::FromShift(Matrix shift, std::vector<std::string> labels) {
  if (shift.rows() != shift.cols()) Fail("shift operator must be square");
  if (shift.rows() < 1) Fail("graph must have at least one node");
  RequireFinite(shift, "shift operator");
  if (MaxAsymmetry(shift) > kSymmetryTol) Fail("shift operator is not symmetric");
  if (!labels.empty() && static_cast<Eigen::Index>(labels.size()) != shift.rows()) {
    Fail("label count does not match node count");
  }
  Graph g;
  g.shift_ = std::move(shift);
  g.labels_ = std::move(labels);
  return g;
}

int Graph::FindLabel(const std::string& label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  return it == labels_.end() ? -1 : static_cast<int>(it - labels_.begin());
}

Graph BuildShiftFromAdjacency(const Matrix& w, Normalization normalization,
                              std::vector<std::string> labels) {
  if (w.rows() != w.cols()) Fail("adjacency must be square");
  RequireFinite(w, "adjacency");
  if (MaxAsymmetry(w) > kSymmetryTol) Fail("adjacency is not symmetric");
  if ((w.array() < 0.0).any()) Fail("adjacency has a negative weight");
  if (w.diagonal().cwiseAbs().maxCoeff() != 0.0) Fail("adjacency has a nonzero diagonal");

  Matrix shift = w;
  if (normalization == Normalization::kSymmetricDegree) {
    const Vector degree = w.rowwise().sum();
    Vector scale(w.rows());
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      scale(i) = degree(i) > 0.0 ? 1.0 / std::sqrt(degree(i)) : 0.0;
    }
    shift = scale.asDiagonal() * w * scale.asDiagonal();
    // D^{-1/2} W D^{-1/2} can pick up rounding asymmetry.
    shift = 0.5 * (shift + shift.transpose()).eval();
  }
  return Graph::FromShift(std::move(shift), std::move(labels));
}

Graph RandomGraph(const RandomGraphModel& model, int n, std::uint64_t seed) {
  if (n < 1) Fail("node count must be positive");
  auto check_p = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) Fail(std::string("probability ") + name + " outside [0,1]");
  };
  std::vector<int> block(n, 0);
  double p_in = 0.0, p_out = 0.0;
  if (const auto* er = std::get_if<ErdosRenyi>(&model)) {
    check_p(er->p, "p");
    p_in = p_out = er->p;
  } else {
    const auto& sbm = std::get<StochasticBlock>(model);
    check_p(sbm.p_in, "p_in");
    check_p(sbm.p_out, "p_out");
    if (sbm.blocks < 1 || sbm.blocks > n) Fail("block count must be in [1, n]");
    for (int i = 0; i < n; ++i) block[i] = static_cast<int>((static_cast<long>(i) * sbm.blocks) / n);
    p_in = sbm.p_in;
    p_out = sbm.p_out;
  }

  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix w = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double p = block[i] == block[j] ? p_in : p_out;
      // Always draw so the stream layout does not depend on p.
      const double u = unif(rng);
      if (u < p) w(i, j) = w(j, i) = 1.0;
    }
  }
  return Graph::FromShift(std::move(w));
}

double SpectralNorm(const Matrix& m) {
  RequireFinite(m, "matrix");
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

SpectralDecomposition EigendecomposeSymmetric(const Matrix& s) {
  if (s.rows() != s.cols()) Fail("eigendecomposition needs a square matrix");
  RequireFinite(s, "matrix");
  if (MaxAsymmetry(s) > 1e-10) Fail("eigendecomposition needs a symmetric matrix");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(s);
  if (solver.info() != Eigen::Success) FailNumeric("symmetric eigensolver did not converge");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

double SpectralRadius(const Matrix& m) {
  if (m.rows() != m.cols()) Fail("spectral radius needs a square matrix");
  RequireFinite(m, "matrix");
  Eigen::EigenSolver<Matrix> solver(m, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) FailNumeric("eigensolver did not converge");
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

const char* ToString(PerturbationKind kind) {
  switch (kind) {
    case PerturbationKind::kAdditive: return "additive";
    case PerturbationKind::kMultiplicative: return "multiplicative";
    case PerturbationKind::kMixed: return "mixed";
  }
  return "?";
}

PerturbationKind ParsePerturbationKind(const std::string& name) {
  if (name == "additive") return PerturbationKind::kAdditive;
  if (name == "multiplicative" || name == "relative") return PerturbationKind::kMultiplicative;
  if (name == "mixed") return PerturbationKind::kMixed;
  Fail("unknown perturbation kind '" + name + "'");
}

void PerturbationSpec::Validate() const {
  if (!std::isfinite(t0_norm) || !std::isfinite(t1_norm) || t0_norm < 0.0 || t1_norm < 0.0) {
    Fail("perturbation norms must be finite and nonnegative");
  }
  if (kind == PerturbationKind::kAdditive && t1_norm != 0.0) {
    Fail("additive perturbation must have t1_norm = 0");
  }
  if (kind == PerturbationKind::kMultiplicative && t0_norm != 0.0) {
    Fail("multiplicative perturbation must have t0_norm = 0");
  }
}

Matrix RandomSymmetricWithNorm(int n, double target_norm, std::uint64_t seed) {
  if (target_norm == 0.0) return Matrix::Zero(n, n);
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = normal(rng);
  Matrix sym = 0.5 * (g + g.transpose());
  double norm = SpectralNorm(sym);
  if (norm == 0.0) FailNumeric("degenerate Gaussian draw");
  sym *= target_norm / norm;
  return sym;
}

PerturbationRealization RealizePerturbation(const PerturbationSpec& spec, const Graph& g) {
  spec.Validate();
  PerturbationRealization r;
  r.t0 = RandomSymmetricWithNorm(g.n(), spec.t0_norm, DeriveSeed(spec.seed, {0}));
  r.t1 = RandomSymmetricWithNorm(g.n(), spec.t1_norm, DeriveSeed(spec.seed, {1}));
  r.perturbed_shift = ApplyPerturbation(g.shift(), r.t0, r.t1);
  return r;
}

Matrix ApplyPerturbation(const Matrix& shift, const Matrix& t0, const Matrix& t1) {
  if (shift.rows() != shift.cols() || t0.rows() != shift.rows() || t0.cols() != shift.cols() ||
      t1.rows() != shift.rows() || t1.cols() != shift.cols()) {
    std::ostringstream os;
    os << "perturbation size mismatch: shift " << shift.rows() << "x" << shift.cols()
       << ", t0 " << t0.rows() << "x" << t0.cols() << ", t1 " << t1.rows() << "x" << t1.cols();
    Fail(os.str());
  }
  Matrix out = shift + t0;
  out.noalias() += t1 * shift;
  return out;
}

}  // namespace aggstab
