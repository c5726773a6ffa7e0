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

#ifndef AGGSTAB_GRAPH_HPP_
#define AGGSTAB_GRAPH_HPP_

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace aggstab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// A real vector with one value per node.
using Signal = Eigen::VectorXd;

inline constexpr double kSymmetryTol = 1e-12;

// Graph with a dense, symmetric real shift operator.
class Graph {
 public:
  Graph() = default;

  // Validates shape, finiteness and symmetry (kSymmetryTol, absolute).
  // `labels` is either empty or has one entry per node.
  static Graph FromShift(Matrix shift, std::vector<std::string> labels = {});

  int n() const { return static_cast<int>(shift_.rows()); }
  const Matrix& shift() const { return shift_; }
  const std::vector<std::string>& labels() const { return labels_; }

  // Index of the node whose label equals `label`, or -1.
  int FindLabel(const std::string& label) const;

 private:
  Matrix shift_;
  std::vector<std::string> labels_;
};

enum class Normalization { kNone, kSymmetricDegree };

Graph BuildShiftFromAdjacency(const Matrix& adjacency,
                              Normalization normalization = Normalization::kNone,
                              std::vector<std::string> labels = {});

struct ErdosRenyi {
  double p = 0.0;
};

// Stochastic block model with `blocks` contiguous, near-equal blocks.
struct StochasticBlock {
  int blocks = 1;
  double p_in = 0.0;
  double p_out = 0.0;
};

using RandomGraphModel = std::variant<ErdosRenyi, StochasticBlock>;

// Symmetric 0/1 adjacency with zero diagonal; deterministic per (model, n, seed).
Graph RandomGraph(const RandomGraphModel& model, int n, std::uint64_t seed);

// Largest singular value.
double SpectralNorm(const Matrix& m);

struct SpectralDecomposition {
  Vector eigenvalues;   // ascending
  Matrix eigenvectors;  // orthonormal columns
};

SpectralDecomposition EigendecomposeSymmetric(const Matrix& s);

// Largest eigenvalue modulus of a (possibly non-symmetric) square matrix.
double SpectralRadius(const Matrix& m);

enum class PerturbationKind { kAdditive, kMultiplicative, kMixed };

const char* ToString(PerturbationKind kind);
PerturbationKind ParsePerturbationKind(const std::string& name);

struct PerturbationSpec {
  PerturbationKind kind = PerturbationKind::kMixed;
  double t0_norm = 0.0;
  double t1_norm = 0.0;
  std::uint64_t seed = 0;

  void Validate() const;
};

// Concrete deformation T(S) = T0 + T1 S and the perturbed shift S + T(S).
struct PerturbationRealization {
  Matrix t0;
  Matrix t1;
  Matrix perturbed_shift;
};

PerturbationRealization RealizePerturbation(const PerturbationSpec& spec,
                                            const Graph& g);

Matrix ApplyPerturbation(const Matrix& shift, const Matrix& t0, const Matrix& t1);

// Symmetric Gaussian matrix rescaled to the requested spectral norm.
Matrix RandomSymmetricWithNorm(int n, double target_norm, std::uint64_t seed);

}  // namespace aggstab

#endif  // AGGSTAB_GRAPH_HPP_
