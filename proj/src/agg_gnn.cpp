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

#include "aggstab/agg_gnn.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "aggstab/error.hpp"
#include "aggstab/rng.hpp"

namespace aggstab {

const char* ToString(Nonlinearity v) {
  switch (v) {
    case Nonlinearity::kRelu: return "relu";
    case Nonlinearity::kAbs: return "abs";
    case Nonlinearity::kTanh: return "tanh";
    case Nonlinearity::kIdentity: return "identity";
  }
  return "?";
}

const char* ToString(PoolKind v) {
  switch (v) {
    case PoolKind::kNone: return "none";
    case PoolKind::kMax: return "max";
    case PoolKind::kAvg: return "avg";
  }
  return "?";
}

const char* ToString(FirstLayerMode v) {
  return v == FirstLayerMode::kShared ? "shared" : "per_node";
}

const char* ToString(ReadoutKind v) {
  switch (v) {
    case ReadoutKind::kSum: return "sum";
    case ReadoutKind::kMean: return "mean";
    case ReadoutKind::kLinear: return "linear";
  }
  return "?";
}

Nonlinearity ParseNonlinearity(const std::string& s) {
  if (s == "relu") return Nonlinearity::kRelu;
  if (s == "abs") return Nonlinearity::kAbs;
  if (s == "tanh") return Nonlinearity::kTanh;
  if (s == "identity") return Nonlinearity::kIdentity;
  Fail("unknown nonlinearity '" + s + "'");
}

PoolKind ParsePoolKind(const std::string& s) {
  if (s == "none") return PoolKind::kNone;
  if (s == "max") return PoolKind::kMax;
  if (s == "avg") return PoolKind::kAvg;
  Fail("unknown pooling '" + s + "'");
}

FirstLayerMode ParseFirstLayerMode(const std::string& s) {
  if (s == "shared") return FirstLayerMode::kShared;
  if (s == "per_node") return FirstLayerMode::kPerNode;
  Fail("unknown first_layer_mode '" + s + "'");
}

ReadoutKind ParseReadoutKind(const std::string& s) {
  if (s == "sum") return ReadoutKind::kSum;
  if (s == "mean") return ReadoutKind::kMean;
  if (s == "linear") return ReadoutKind::kLinear;
  Fail("unknown readout '" + s + "'");
}

int Pool::OutputLength(int length) const {
  if (stride < 1) Fail("pooling stride must be >= 1");
  if (kind == PoolKind::kNone) return length;
  return (length + stride - 1) / stride;
}

AggMatrix Aggregate(const Matrix& s, const Signal& x, int a) {
  if (a < 0) Fail("aggregation order must be nonnegative");
  if (s.rows() != s.cols() || s.rows() != x.size()) Fail("aggregation dimension mismatch");
  AggMatrix m(x.size(), a + 1);
  m.col(0) = x;
  for (int k = 1; k <= a; ++k) m.col(k).noalias() = s * m.col(k - 1);
  return m;
}

Vector RowVectorize(const AggMatrix& m) {
  Vector out(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index k = 0; k < m.cols(); ++k) out(i * m.cols() + k) = m(i, k);
  return out;
}

double ApplyNonlinearity(double v, Nonlinearity kind) {
  switch (kind) {
    case Nonlinearity::kRelu: return v > 0.0 ? v : 0.0;
    case Nonlinearity::kAbs: return std::abs(v);
    case Nonlinearity::kTanh: return std::tanh(v);
    case Nonlinearity::kIdentity: return v;
  }
  Fail("unknown nonlinearity");
}

Matrix ApplyNonlinearity(const Matrix& t, Nonlinearity kind) {
  return t.unaryExpr([kind](double v) { return ApplyNonlinearity(v, kind); });
}

Matrix ApplyPooling(const Matrix& t, const Pool& pool) {
  const int len = static_cast<int>(t.cols());
  const int out_len = pool.OutputLength(len);
  if (pool.kind == PoolKind::kNone) return t;
  Matrix out(t.rows(), out_len);
  for (Eigen::Index c = 0; c < t.rows(); ++c) {
    for (int w = 0; w < out_len; ++w) {
      const int begin = w * pool.stride;
      const int count = std::min(pool.stride, len - begin);
      auto window = t.row(c).segment(begin, count);
      out(c, w) = pool.kind == PoolKind::kMax ? window.maxCoeff() : window.mean();
    }
  }
  return out;
}

Matrix CircularConv(const Matrix& in, std::span<const double> weights, int features_out, int taps) {
  const int fin = static_cast<int>(in.rows());
  const int len = static_cast<int>(in.cols());
  if (taps > len) Fail("filter taps exceed the signal length");
  if (weights.size() != static_cast<std::size_t>(features_out) * fin * taps) {
    Fail("convolution weight count mismatch");
  }
  Matrix out = Matrix::Zero(features_out, len);
  for (int o = 0; o < features_out; ++o) {
    for (int i = 0; i < fin; ++i) {
      const double* w = weights.data() + (static_cast<std::size_t>(o) * fin + i) * taps;
      for (int j = 0; j < taps; ++j) {
        if (w[j] == 0.0) continue;
        for (int q = 0; q < len; ++q) {
          const int src = q + j < len ? q + j : q + j - len;
          out(o, q) += w[j] * in(i, src);
        }
      }
    }
  }
  return out;
}

NodeFeatures FirstLayerOperator(const Matrix& s, const Signal& x, int a,
                                const std::vector<PolyFilter>& filters, FirstLayerMode mode) {
  const AggMatrix agg = Aggregate(s, x, a);
  const int n = static_cast<int>(x.size());
  const int len = a + 1;
  if (filters.empty()) Fail("first layer needs at least one filter");
  int fout = static_cast<int>(filters.size());
  if (mode == FirstLayerMode::kPerNode) {
    if (filters.size() % n != 0) Fail("per-node mode needs N filters per output feature");
    fout /= n;
  }
  NodeFeatures out(n);
  std::vector<double> w(static_cast<std::size_t>(fout) * len);
  for (int i = 0; i < n; ++i) {
    const std::size_t base = mode == FirstLayerMode::kPerNode ? static_cast<std::size_t>(i) * fout : 0;
    for (int o = 0; o < fout; ++o) {
      const PolyFilter f = filters[base + o].Padded(len);
      std::copy(f.coeffs().begin(), f.coeffs().end(), w.begin() + static_cast<std::size_t>(o) * len);
    }
    out[i] = CircularConv(agg.row(i), w, fout, len);
  }
  return out;
}

// ---- AggGnnModel -----------------------------------------------------------

void AggGnnModel::ComputeLengths() {
  lengths_.assign(1, config_.a + 1);
  for (const auto& l : config_.layers) lengths_.push_back(l.pool.OutputLength(lengths_.back()));
}

void AggGnnModel::Validate() const {
  const auto& c = config_;
  if (c.a < 0) Fail("aggregation order must be nonnegative");
  if (c.layers.empty()) Fail("model needs at least one CNN layer");
  const bool needs_nodes =
      c.first_layer_mode == FirstLayerMode::kPerNode || c.readout == ReadoutKind::kLinear;
  if (needs_nodes && c.nodes < 1) Fail("per-node layers and linear readouts need 'nodes'");
  for (int l = 0; l < num_layers(); ++l) {
    const auto& spec = c.layers[l];
    std::ostringstream where;
    where << "layer " << l << ": ";
    if (spec.taps < 1 || spec.features_in < 1 || spec.features_out < 1) {
      Fail(where.str() + "taps and features must be >= 1");
    }
    if (spec.pool.stride < 1) Fail(where.str() + "pooling stride must be >= 1");
    if (l == 0 && spec.features_in != 1) Fail(where.str() + "first layer takes one input feature");
    if (l > 0 && spec.features_in != c.layers[l - 1].features_out) {
      Fail(where.str() + "features_in does not chain with the previous layer");
    }
    if (spec.taps > lengths_[l]) {
      Fail(where.str() + "taps exceed the incoming length " + std::to_string(lengths_[l]));
    }
    std::size_t expected = static_cast<std::size_t>(spec.features_out) * spec.features_in * spec.taps;
    if (l == 0 && c.first_layer_mode == FirstLayerMode::kPerNode) expected *= c.nodes;
    if (layer_weights_.size() == c.layers.size() && layer_weights_[l].size() != expected) {
      Fail(where.str() + "expected " + std::to_string(expected) + " weights, got " +
           std::to_string(layer_weights_[l].size()));
    }
  }
  if (c.readout == ReadoutKind::kLinear && !readout_weights_.empty() &&
      readout_weights_.size() !=
          static_cast<std::size_t>(c.nodes) * OutputChannels() * OutputLength()) {
    Fail("linear readout weight count mismatch");
  }
  for (const auto& w : layer_weights_)
    for (double v : w)
      if (!std::isfinite(v)) Fail("model weight is not finite");
  for (double v : readout_weights_)
    if (!std::isfinite(v)) Fail("readout weight is not finite");
}

AggGnnModel AggGnnModel::Initialize(const Config& config, std::uint64_t seed) {
  AggGnnModel m;
  m.config_ = config;
  m.ComputeLengths();
  m.Validate();
  Rng rng(seed);
  for (int l = 0; l < m.num_layers(); ++l) {
    const auto& spec = config.layers[l];
    std::size_t count = static_cast<std::size_t>(spec.features_out) * spec.features_in * spec.taps;
    if (l == 0 && config.first_layer_mode == FirstLayerMode::kPerNode) count *= config.nodes;
    const double bound = 1.0 / std::sqrt(static_cast<double>(spec.features_in * spec.taps));
    std::uniform_real_distribution<double> unif(-bound, bound);
    std::vector<double> w(count);
    for (double& v : w) v = unif(rng);
    m.layer_weights_.push_back(std::move(w));
  }
  if (config.readout == ReadoutKind::kLinear) {
    const std::size_t count =
        static_cast<std::size_t>(config.nodes) * m.OutputChannels() * m.OutputLength();
    const double bound = 1.0 / std::sqrt(static_cast<double>(count));
    std::uniform_real_distribution<double> unif(-bound, bound);
    m.readout_weights_.resize(count);
    for (double& v : m.readout_weights_) v = unif(rng);
  }
  return m;
}

AggGnnModel AggGnnModel::FromWeights(const Config& config,
                                     std::vector<std::vector<double>> layer_weights,
                                     std::vector<double> readout_weights) {
  AggGnnModel m;
  m.config_ = config;
  m.ComputeLengths();
  if (layer_weights.size() != config.layers.size()) Fail("one weight vector per layer required");
  m.layer_weights_ = std::move(layer_weights);
  m.readout_weights_ = std::move(readout_weights);
  if (config.readout == ReadoutKind::kLinear && m.readout_weights_.empty()) {
    Fail("linear readout needs readout weights");
  }
  if (config.readout != ReadoutKind::kLinear && !m.readout_weights_.empty()) {
    Fail("readout weights given for a non-linear readout");
  }
  m.Validate();
  return m;
}

std::span<const double> AggGnnModel::WeightsFor(int l, int node) const {
  const auto& w = layer_weights_[l];
  if (l == 0 && config_.first_layer_mode == FirstLayerMode::kPerNode) {
    const std::size_t per = w.size() / config_.nodes;
    return std::span<const double>(w).subspan(static_cast<std::size_t>(node) * per, per);
  }
  return w;
}

std::vector<PolyFilter> AggGnnModel::FirstLayerFilters() const {
  const auto& spec = config_.layers[0];
  const auto& w = layer_weights_[0];
  std::vector<PolyFilter> out;
  for (std::size_t start = 0; start < w.size(); start += spec.taps) {
    std::vector<double> c(w.begin() + start, w.begin() + start + spec.taps);
    out.push_back(PolyFilter(std::move(c)).Padded(config_.a + 1));
  }
  return out;
}

std::size_t AggGnnModel::ParameterCount() const {
  std::size_t n = readout_weights_.size();
  for (const auto& w : layer_weights_) n += w.size();
  return n;
}

std::vector<double> AggGnnModel::FlatParameters() const {
  std::vector<double> out;
  out.reserve(ParameterCount());
  for (const auto& w : layer_weights_) out.insert(out.end(), w.begin(), w.end());
  out.insert(out.end(), readout_weights_.begin(), readout_weights_.end());
  return out;
}

void AggGnnModel::SetFlatParameters(std::span<const double> values) {
  if (values.size() != ParameterCount()) Fail("parameter count mismatch");
  std::size_t pos = 0;
  for (auto& w : layer_weights_) {
    std::copy_n(values.begin() + pos, w.size(), w.begin());
    pos += w.size();
  }
  std::copy_n(values.begin() + pos, readout_weights_.size(), readout_weights_.begin());
}

std::string AggGnnModel::ParameterName(std::size_t index) const {
  for (int l = 0; l < num_layers(); ++l) {
    if (index < layer_weights_[l].size()) {
      return "layer" + std::to_string(l) + ".w[" + std::to_string(index) + "]";
    }
    index -= layer_weights_[l].size();
  }
  return "readout.w[" + std::to_string(index) + "]";
}

double AggGnnModel::Readout(const Matrix& per_node) const {
  const int channels = OutputChannels();
  const int len = OutputLength();
  switch (config_.readout) {
    case ReadoutKind::kSum:
    case ReadoutKind::kMean: {
      const double sum = per_node.middleCols(static_cast<Eigen::Index>(channels - 1) * len, len).sum();
      return config_.readout == ReadoutKind::kSum ? sum
                                                  : sum / static_cast<double>(per_node.rows() * len);
    }
    case ReadoutKind::kLinear: {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < per_node.rows(); ++i)
        for (Eigen::Index c = 0; c < per_node.cols(); ++c)
          acc += readout_weights_[i * per_node.cols() + c] * per_node(i, c);
      return acc;
    }
  }
  return 0.0;
}

ForwardTrace AggGnnModel::ForwardWithTrace(const Matrix& s, const Signal& x) const {
  const int n = static_cast<int>(x.size());
  const bool node_bound =
      config_.first_layer_mode == FirstLayerMode::kPerNode || config_.readout == ReadoutKind::kLinear;
  if (node_bound && n != config_.nodes) {
    Fail("model expects " + std::to_string(config_.nodes) + " nodes, got " + std::to_string(n));
  }
  ForwardTrace trace;
  trace.aggregation = Aggregate(s, x, config_.a);
  trace.layers.resize(config_.layers.size());
  for (int l = 0; l < num_layers(); ++l) {
    const auto& spec = config_.layers[l];
    LayerTrace& lt = trace.layers[l];
    lt.input.resize(n);
    lt.pre.resize(n);
    lt.act.resize(n);
    lt.out.resize(n);
    for (int i = 0; i < n; ++i) {
      lt.input[i] = l == 0 ? Matrix(trace.aggregation.row(i)) : trace.layers[l - 1].out[i];
      lt.pre[i] = CircularConv(lt.input[i], WeightsFor(l, i), spec.features_out, spec.taps);
      lt.act[i] = ApplyNonlinearity(lt.pre[i], spec.nonlinearity);
      lt.out[i] = ApplyPooling(lt.act[i], spec.pool);
    }
  }
  const int channels = OutputChannels();
  const int len = OutputLength();
  Matrix per_node(n, static_cast<Eigen::Index>(channels) * len);
  for (int i = 0; i < n; ++i) {
    const Matrix& o = trace.layers.back().out[i];
    for (int c = 0; c < channels; ++c)
      for (int q = 0; q < len; ++q) per_node(i, c * len + q) = o(c, q);
  }
  trace.result.readout = Readout(per_node);
  trace.result.per_node = std::move(per_node);
  return trace;
}

ForwardResult AggGnnModel::Forward(const Matrix& s, const Signal& x) const {
  return ForwardWithTrace(s, x).result;
}

NodeFeatures AggGnnModel::FirstLayerOutput(const Matrix& s, const Signal& x) const {
  return FirstLayerOperator(s, x, config_.a, FirstLayerFilters(), config_.first_layer_mode);
}

Matrix AggGnnModel::LayerOperatorMatrix(int l) const {
  if (l < 1 || l >= num_layers()) Fail("layer operator defined for deeper layers only");
  const auto& spec = config_.layers[l];
  const int len = lengths_[l];
  const int fin = spec.features_in;
  Matrix op = Matrix::Zero(static_cast<Eigen::Index>(spec.features_out) * len,
                           static_cast<Eigen::Index>(fin) * len);
  Matrix basis = Matrix::Zero(fin, len);
  for (int i = 0; i < fin; ++i) {
    for (int q = 0; q < len; ++q) {
      basis(i, q) = 1.0;
      const Matrix col = CircularConv(basis, layer_weights_[l], spec.features_out, spec.taps);
      for (int o = 0; o < spec.features_out; ++o)
        for (int r = 0; r < len; ++r) op(o * len + r, i * len + q) = col(o, r);
      basis(i, q) = 0.0;
    }
  }
  return op;
}

// ---- SelGnnModel -----------------------------------------------------------

SelGnnModel::SelGnnModel(std::vector<Layer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) Fail("selection GNN needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.taps < 1 || layer.features_in < 1 || layer.features_out < 1) {
      Fail("selection layer taps and features must be >= 1");
    }
    if (l == 0 && layer.features_in != 1) Fail("selection GNN takes one input feature");
    if (l > 0 && layer.features_in != layers_[l - 1].features_out) {
      Fail("selection layer features do not chain");
    }
    if (layer.weights.size() !=
        static_cast<std::size_t>(layer.features_out) * layer.features_in * layer.taps) {
      Fail("selection layer weight count mismatch");
    }
  }
}

SelGnnModel SelGnnModel::Initialize(const std::vector<Layer>& shapes, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Layer> layers = shapes;
  for (auto& layer : layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.features_in * layer.taps));
    std::uniform_real_distribution<double> unif(-bound, bound);
    layer.weights.resize(static_cast<std::size_t>(layer.features_out) * layer.features_in * layer.taps);
    for (double& v : layer.weights) v = unif(rng);
  }
  return SelGnnModel(std::move(layers));
}

Matrix SelGnnModel::Forward(const Matrix& s, const Signal& x) const {
  if (s.rows() != s.cols() || s.rows() != x.size()) Fail("selection GNN dimension mismatch");
  Matrix y = x;
  for (const auto& layer : layers_) {
    Matrix out = Matrix::Zero(y.rows(), layer.features_out);
    Matrix diffused = y;
    for (int k = 0; k < layer.taps; ++k) {
      if (k > 0) diffused = s * diffused;
      for (int o = 0; o < layer.features_out; ++o)
        for (int i = 0; i < layer.features_in; ++i)
          out.col(o) += layer.weights[(static_cast<std::size_t>(o) * layer.features_in + i) * layer.taps + k] *
                        diffused.col(i);
    }
    y = ApplyNonlinearity(out, layer.nonlinearity);
  }
  return y;
}

Conjugated PermutationConjugate(const Graph& g, const Signal& x, const std::vector<int>& perm) {
  const int n = g.n();
  if (static_cast<int>(perm.size()) != n || x.size() != n) Fail("permutation size mismatch");
  std::vector<char> seen(n, 0);
  for (int p : perm) {
    if (p < 0 || p >= n || seen[p]) Fail("invalid permutation");
    seen[p] = 1;
  }
  Matrix s(n, n);
  Signal y(n);
  for (int i = 0; i < n; ++i) {
    y(perm[i]) = x(i);
    for (int j = 0; j < n; ++j) s(perm[i], perm[j]) = g.shift()(i, j);
  }
  std::vector<std::string> labels;
  if (!g.labels().empty()) {
    labels.resize(n);
    for (int i = 0; i < n; ++i) labels[perm[i]] = g.labels()[i];
  }
  return {Graph::FromShift(std::move(s), std::move(labels)), std::move(y)};
}

}  // namespace aggstab
