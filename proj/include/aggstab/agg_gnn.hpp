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

#ifndef AGGSTAB_AGG_GNN_HPP_
#define AGGSTAB_AGG_GNN_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aggstab/filters.hpp"
#include "aggstab/graph.hpp"

namespace aggstab {

// N x (a+1) matrix [x, Sx, ..., S^a x].
using AggMatrix = Matrix;

// Per-node CNN feature maps: one (channels x length) matrix per node.
using NodeFeatures = std::vector<Matrix>;

enum class Nonlinearity { kRelu, kAbs, kTanh, kIdentity };
enum class PoolKind { kNone, kMax, kAvg };
enum class FirstLayerMode { kShared, kPerNode };
enum class ReadoutKind { kSum, kMean, kLinear };

const char* ToString(Nonlinearity v);
const char* ToString(PoolKind v);
const char* ToString(FirstLayerMode v);
const char* ToString(ReadoutKind v);
Nonlinearity ParseNonlinearity(const std::string& s);
PoolKind ParsePoolKind(const std::string& s);
FirstLayerMode ParseFirstLayerMode(const std::string& s);
ReadoutKind ParseReadoutKind(const std::string& s);

// Non-overlapping windows along the length axis; a trailing partial window
// is kept, so the output length is ceil(length / stride).
struct Pool {
  PoolKind kind = PoolKind::kNone;
  int stride = 1;

  int OutputLength(int length) const;
};

struct CnnLayerSpec {
  int taps = 1;
  int features_in = 1;
  int features_out = 1;
  Nonlinearity nonlinearity = Nonlinearity::kIdentity;
  Pool pool;
};

AggMatrix Aggregate(const Matrix& s, const Signal& x, int a);

// Rows concatenated: [x]_1, [Sx]_1, ..., [S^a x]_1, [x]_2, ...
Vector RowVectorize(const AggMatrix& m);

double ApplyNonlinearity(double v, Nonlinearity kind);
Matrix ApplyNonlinearity(const Matrix& t, Nonlinearity kind);
Matrix ApplyPooling(const Matrix& t, const Pool& pool);

// Cyclic convolution of every channel row: out[o][q] = sum_i sum_j w[o][i][j] in[i][(q+j) mod L],
// i.e. each input row (as a row vector) times the circulant of its filter.
// `weights` is laid out [o][i][j] with `taps` entries per (o, i).
Matrix CircularConv(const Matrix& in, std::span<const double> weights, int features_out, int taps);

// First CNN layer applied to the rows of the aggregation matrix, before any
// nonlinearity. Shared mode takes F filters; per-node mode takes N*F filters
// ordered node-major. Filters shorter than a+1 are zero-padded.
NodeFeatures FirstLayerOperator(const Matrix& s, const Signal& x, int a,
                                const std::vector<PolyFilter>& filters, FirstLayerMode mode);

struct ForwardResult {
  Matrix per_node;  // N x (channels * length), channel-major per row
  double readout = 0.0;
};

// Cached intermediates for reverse-mode differentiation.
struct LayerTrace {
  NodeFeatures input;
  NodeFeatures pre;   // after convolution
  NodeFeatures act;   // after nonlinearity
  NodeFeatures out;   // after pooling
};

struct ForwardTrace {
  AggMatrix aggregation;
  std::vector<LayerTrace> layers;
  ForwardResult result;
};

class AggGnnModel {
 public:
  struct Config {
    int a = 0;
    int nodes = 0;  // required for per-node first layers and linear readouts
    FirstLayerMode first_layer_mode = FirstLayerMode::kShared;
    std::vector<CnnLayerSpec> layers;
    ReadoutKind readout = ReadoutKind::kSum;
  };

  AggGnnModel() = default;

  // Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  static AggGnnModel Initialize(const Config& config, std::uint64_t seed);

  // Validates shapes; `layer_weights` has one vector per layer.
  static AggGnnModel FromWeights(const Config& config, std::vector<std::vector<double>> layer_weights,
                                 std::vector<double> readout_weights = {});

  const Config& config() const { return config_; }
  int a() const { return config_.a; }
  int num_layers() const { return static_cast<int>(config_.layers.size()); }
  const CnnLayerSpec& layer(int l) const { return config_.layers[l]; }

  // Length of the signal entering layer l (l = num_layers gives the output length).
  int LengthAt(int l) const { return lengths_[l]; }
  int OutputChannels() const { return config_.layers.back().features_out; }
  int OutputLength() const { return lengths_.back(); }

  const std::vector<double>& layer_weights(int l) const { return layer_weights_[l]; }
  const std::vector<double>& readout_weights() const { return readout_weights_; }

  // Weights of layer l at node `node` (node is ignored unless layer 0 is per-node).
  std::span<const double> WeightsFor(int l, int node) const;

  // First-layer filters zero-padded to a+1 taps, in FirstLayerOperator order.
  std::vector<PolyFilter> FirstLayerFilters() const;

  // Flat parameter view: layer weights in order, then readout weights.
  std::size_t ParameterCount() const;
  std::vector<double> FlatParameters() const;
  void SetFlatParameters(std::span<const double> values);
  std::string ParameterName(std::size_t index) const;

  ForwardResult Forward(const Matrix& s, const Signal& x) const;
  ForwardTrace ForwardWithTrace(const Matrix& s, const Signal& x) const;

  // Per-node outputs of the first layer only (no nonlinearity), flattened.
  NodeFeatures FirstLayerOutput(const Matrix& s, const Signal& x) const;

  // Dense matrix of layer l >= 1 acting on a flattened (channels x length) map.
  Matrix LayerOperatorMatrix(int l) const;

 private:
  void Validate() const;
  void ComputeLengths();
  double Readout(const Matrix& per_node) const;

  Config config_;
  std::vector<int> lengths_;
  std::vector<std::vector<double>> layer_weights_;
  std::vector<double> readout_weights_;
};

// Index of the readout weight for (node, channel, position).
inline std::size_t ReadoutIndex(int node, int channel, int position, int channels, int length) {
  return (static_cast<std::size_t>(node) * channels + channel) * length + position;
}

class SelGnnModel {
 public:
  struct Layer {
    int taps = 1;
    int features_in = 1;
    int features_out = 1;
    Nonlinearity nonlinearity = Nonlinearity::kRelu;
    std::vector<double> weights;  // [o][i][k]
  };

  explicit SelGnnModel(std::vector<Layer> layers);
  static SelGnnModel Initialize(const std::vector<Layer>& shapes, std::uint64_t seed);

  const std::vector<Layer>& layers() const { return layers_; }

  // N x F_last outputs of the graph-convolution stack.
  Matrix Forward(const Matrix& s, const Signal& x) const;

 private:
  std::vector<Layer> layers_;
};

struct Conjugated {
  Graph graph;
  Signal signal;
};

// Relabels node i as perm[i]: returns (P S P^T, P x).
Conjugated PermutationConjugate(const Graph& g, const Signal& x, const std::vector<int>& perm);

}  // namespace aggstab

#endif  // AGGSTAB_AGG_GNN_HPP_
