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
#include <numeric>

#include "aggstab/agg_gnn.hpp"
#include "aggstab/rng.hpp"
#include "doctest.h"
#include "test_util.hpp"

namespace aggstab {
namespace {

using testing::MaxAbs;
using testing::Path3;
using testing::Swap2;

Signal Vec(std::initializer_list<double> v) {
  Signal s(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) s(k++) = x;
  return s;
}

CnnLayerSpec Layer(int taps, int fin, int fout, Nonlinearity nl = Nonlinearity::kIdentity,
                   Pool pool = {}) {
  return CnnLayerSpec{taps, fin, fout, nl, pool};
}

AggGnnModel::Config TwoLayer(int a, int nodes = 0) {
  AggGnnModel::Config c;
  c.a = a;
  c.nodes = nodes;
  c.layers = {Layer(3, 1, 4, Nonlinearity::kRelu, {PoolKind::kMax, 2}),
              Layer(2, 4, 2, Nonlinearity::kTanh, {PoolKind::kAvg, 2})};
  return c;
}

TEST_CASE("aggregate") {
  const AggMatrix m = Aggregate(Path3(), Vec({1, 0, 0}), 2);
  Matrix expect(3, 3);
  expect << 1, 0, 1, 0, 1, 0, 0, 0, 1;
  CHECK(m == expect);
  CHECK(Aggregate(Path3(), Vec({1, 2, 3}), 0) == Matrix(Vec({1, 2, 3})));
  const AggMatrix eye = Aggregate(Matrix::Identity(3, 3), Vec({4, 5, 6}), 4);
  for (int k = 0; k <= 4; ++k) CHECK(eye.col(k) == Vec({4, 5, 6}));
  CHECK_THROWS_AS(Aggregate(Path3(), Vec({1, 2}), 2), Error);
  CHECK_THROWS_AS(Aggregate(Path3(), Vec({1, 2, 3}), -1), Error);
}

TEST_CASE("row vectorize") {
  Matrix m(2, 2);
  m << 1, 2, 3, 4;
  CHECK(RowVectorize(m) == Vec({1, 2, 3, 4}));
  Matrix r(1, 3);
  r << 5, 6, 7;
  CHECK(RowVectorize(r) == Vec({5, 6, 7}));
  CHECK(RowVectorize(Aggregate(Path3(), Vec({1, 0, 0}), 2)) == Vec({1, 0, 1, 0, 1, 0, 0, 0, 1}));
}

TEST_CASE("first layer operator") {
  Rng rng(1);
  std::normal_distribution<double> g;
  Signal x(4);
  for (int i = 0; i < 4; ++i) x(i) = g(rng);
  Matrix s = Matrix::Random(4, 4);
  s = (s + s.transpose()).eval();
  const AggMatrix agg = Aggregate(s, x, 3);

  const auto id = FirstLayerOperator(s, x, 3, {PolyFilter({1})}, FirstLayerMode::kShared);
  for (int i = 0; i < 4; ++i) CHECK(MaxAbs(id[i] - agg.row(i)) == 0.0);

  const auto zero = FirstLayerOperator(s, x, 3, {PolyFilter({0, 0})}, FirstLayerMode::kShared);
  for (const auto& row : zero) CHECK(row.isZero());

  const auto two = FirstLayerOperator(Swap2(), Vec({1, 2}), 1, {PolyFilter({1, 1})},
                                      FirstLayerMode::kShared);
  CHECK(two[0] == Matrix::Constant(1, 2, 3.0));
  CHECK(two[1] == Matrix::Constant(1, 2, 3.0));

  CHECK_THROWS_AS(FirstLayerOperator(s, x, 1, {PolyFilter({1, 2, 3})}, FirstLayerMode::kShared), Error);
  CHECK_THROWS_AS(FirstLayerOperator(s, x, 3, {PolyFilter({1}), PolyFilter({1}), PolyFilter({1})},
                                     FirstLayerMode::kPerNode),
                  Error);
}

TEST_CASE("first layer matches circulant products and is linear") {
  Rng rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  const int n = 5, a = 4;
  Matrix s = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < i; ++k) s(i, k) = s(k, i) = u(rng);
  Signal x(n), y(n);
  for (int i = 0; i < n; ++i) x(i) = u(rng), y(i) = u(rng);
  std::vector<PolyFilter> bank = {PolyFilter({u(rng), u(rng), u(rng)}),
                                  PolyFilter({u(rng), u(rng), u(rng), u(rng), u(rng)})};
  const auto out = FirstLayerOperator(s, x, a, bank, FirstLayerMode::kShared);
  const AggMatrix agg = Aggregate(s, x, a);
  for (int i = 0; i < n; ++i) {
    for (int f = 0; f < 2; ++f) {
      const Eigen::RowVectorXd want = agg.row(i) * CirculantFromCoeffs(bank[f], a + 1);
      CHECK((out[i].row(f) - want).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
  const double al = 0.7, be = -1.3;
  const auto lhs = FirstLayerOperator(s, al * x + be * y, a, bank, FirstLayerMode::kShared);
  const auto ox = FirstLayerOperator(s, x, a, bank, FirstLayerMode::kShared);
  const auto oy = FirstLayerOperator(s, y, a, bank, FirstLayerMode::kShared);
  for (int i = 0; i < n; ++i) CHECK(MaxAbs(lhs[i] - (al * ox[i] + be * oy[i])) <= 1e-12);
}

TEST_CASE("per-node first layer") {
  // Node 0 keeps its row, node 1 is annihilated.
  const auto out = FirstLayerOperator(Swap2(), Vec({1, 2}), 1, {PolyFilter({1}), PolyFilter({0})},
                                      FirstLayerMode::kPerNode);
  CHECK(out[0] == Aggregate(Swap2(), Vec({1, 2}), 1).row(0));
  CHECK(out[1].isZero());
}

TEST_CASE("nonlinearities") {
  Matrix t(1, 2);
  t << -1, 2;
  Matrix r(1, 2);
  r << 0, 2;
  CHECK(ApplyNonlinearity(t, Nonlinearity::kRelu) == r);
  Rng rng(3);
  std::normal_distribution<double> g(0.0, 3.0);
  for (auto kind : {Nonlinearity::kRelu, Nonlinearity::kAbs, Nonlinearity::kTanh,
                    Nonlinearity::kIdentity}) {
    CHECK(ApplyNonlinearity(0.0, kind) == 0.0);
    double worst = 0.0;
    for (int k = 0; k < 10000; ++k) {
      const double x = g(rng), y = g(rng);
      if (x == y) continue;
      worst = std::max(worst, std::abs(ApplyNonlinearity(x, kind) - ApplyNonlinearity(y, kind)) /
                                  std::abs(x - y));
    }
    CHECK(worst <= 1.0 + 1e-12);
  }
  CHECK(ParseNonlinearity("tanh") == Nonlinearity::kTanh);
  CHECK_THROWS_AS(ParseNonlinearity("sigmoid"), Error);
}

TEST_CASE("pooling") {
  Matrix t(1, 4);
  t << 1, 3, 5, 7;
  Matrix avg(1, 2);
  avg << 2, 6;
  Matrix mx(1, 2);
  mx << 3, 7;
  CHECK(ApplyPooling(t, {PoolKind::kAvg, 2}) == avg);
  CHECK(ApplyPooling(t, {PoolKind::kMax, 2}) == mx);
  CHECK(ApplyPooling(t, {PoolKind::kNone, 1}) == t);
  Matrix odd(1, 5);
  odd << 1, 3, 5, 7, 10;
  Matrix tail(1, 3);
  tail << 2, 6, 10;
  CHECK(ApplyPooling(odd, {PoolKind::kAvg, 2}) == tail);
  CHECK((Pool{PoolKind::kMax, 2}.OutputLength(5)) == 3);
  CHECK_THROWS_AS(ApplyPooling(t, {PoolKind::kMax, 0}), Error);
}

TEST_CASE("circular convolution in deeper layers") {
  // One input and output channel with taps [0, 1]: out[q] = in[q + 1].
  Matrix in(1, 4);
  in << 1, 2, 3, 4;
  const std::vector<double> w = {0, 1};
  Matrix expect(1, 4);
  expect << 2, 3, 4, 1;
  CHECK(CircularConv(in, w, 1, 2) == expect);
}

TEST_CASE("forward examples") {
  AggGnnModel::Config c;
  c.a = 2;
  c.layers = {Layer(1, 1, 1)};
  const auto m = AggGnnModel::FromWeights(c, {{1.0}});
  const auto out = m.Forward(Path3(), Vec({1, 0, 0}));
  CHECK(out.readout == 4.0);
  CHECK(m.Forward(Path3(), Vec({0, 0, 0})).per_node.isZero());

  AggGnnModel::Config c2;
  c2.a = 1;
  c2.layers = {Layer(2, 1, 1, Nonlinearity::kRelu, {PoolKind::kAvg, 2})};
  const auto m2 = AggGnnModel::FromWeights(c2, {{1.0, 1.0}});
  const auto r2 = m2.Forward(Swap2(), Vec({1, 2}));
  CHECK(r2.per_node(0, 0) == 3.0);
  CHECK(r2.per_node(1, 0) == 3.0);
  CHECK(r2.readout == 6.0);
}

TEST_CASE("zero input gives zero output for every architecture") {
  const auto m = AggGnnModel::Initialize(TwoLayer(6), 11);
  const auto out = m.Forward(Path3(), Signal::Zero(3));
  CHECK(out.per_node.isZero());
  CHECK(out.readout == 0.0);
}

TEST_CASE("model validation") {
  AggGnnModel::Config c = TwoLayer(1);
  CHECK_THROWS_AS(AggGnnModel::Initialize(c, 0), Error);  // taps 3 > a + 1
  c = TwoLayer(4);
  c.layers[1].features_in = 3;
  CHECK_THROWS_AS(AggGnnModel::Initialize(c, 0), Error);  // chain broken
  c = TwoLayer(4);
  CHECK_THROWS_AS(AggGnnModel::FromWeights(c, {{1.0}, {1.0}}), Error);
  c.readout = ReadoutKind::kLinear;
  CHECK_THROWS_AS(AggGnnModel::Initialize(c, 0), Error);  // nodes missing
  c.nodes = 3;
  const auto m = AggGnnModel::Initialize(c, 0);
  CHECK_THROWS_AS(m.Forward(Swap2(), Vec({1, 2})), Error);
  AggGnnModel::Config bad = TwoLayer(4);
  bad.layers[0].features_in = 2;
  CHECK_THROWS_AS(AggGnnModel::Initialize(bad, 0), Error);
}

TEST_CASE("flat parameters round trip") {
  AggGnnModel::Config c = TwoLayer(5, 3);
  c.readout = ReadoutKind::kLinear;
  auto m = AggGnnModel::Initialize(c, 4);
  const auto p = m.FlatParameters();
  CHECK(p.size() == m.ParameterCount());
  CHECK(p.size() == 3 * 4 + 2 * 4 * 2 + 3 * 2 * m.OutputLength());
  std::vector<double> q(p.size());
  std::iota(q.begin(), q.end(), 0.0);
  m.SetFlatParameters(q);
  CHECK(m.FlatParameters() == q);
  CHECK(m.layer_weights(1)[0] == 12.0);
  CHECK(m.ParameterName(0).find("layer0") != std::string::npos);
  CHECK_THROWS_AS(m.SetFlatParameters(std::vector<double>(3)), Error);
}

TEST_CASE("initialization is deterministic") {
  const auto a = AggGnnModel::Initialize(TwoLayer(5), 9);
  const auto b = AggGnnModel::Initialize(TwoLayer(5), 9);
  const auto c = AggGnnModel::Initialize(TwoLayer(5), 10);
  CHECK(a.FlatParameters() == b.FlatParameters());
  CHECK(a.FlatParameters() != c.FlatParameters());
}

TEST_CASE("lengths chain through pooling") {
  const auto m = AggGnnModel::Initialize(TwoLayer(6), 1);
  CHECK(m.LengthAt(0) == 7);
  CHECK(m.LengthAt(1) == 4);
  CHECK(m.LengthAt(2) == 2);
  CHECK(m.OutputChannels() == 2);
  CHECK(m.Forward(Path3(), Vec({1, 2, 3})).per_node.cols() == 4);
}

TEST_CASE("first layer filters pad to a + 1") {
  const auto m = AggGnnModel::Initialize(TwoLayer(6), 1);
  const auto bank = m.FirstLayerFilters();
  CHECK(bank.size() == 4);
  for (const auto& f : bank) CHECK(f.size() == 7);
  CHECK(bank[1].coeffs()[0] == m.layer_weights(0)[3]);
  CHECK(bank[1].coeffs()[5] == 0.0);
}

TEST_CASE("first layer output matches the operator") {
  const auto m = AggGnnModel::Initialize(TwoLayer(6), 1);
  const Signal x = Vec({0.3, -1, 2});
  const auto a = m.FirstLayerOutput(Path3(), x);
  const auto b = FirstLayerOperator(Path3(), x, 6, m.FirstLayerFilters(), FirstLayerMode::kShared);
  for (int i = 0; i < 3; ++i) CHECK(MaxAbs(a[i] - b[i]) <= 1e-15);
}

TEST_CASE("layer operator matrix reproduces the convolution") {
  const auto m = AggGnnModel::Initialize(TwoLayer(6), 1);
  const int len = m.LengthAt(1);
  const int fin = m.layer(1).features_in;
  Matrix in = Matrix::Random(fin, len);
  const Matrix conv = CircularConv(in, m.layer_weights(1), m.layer(1).features_out, m.layer(1).taps);
  Eigen::VectorXd flat(fin * len);
  for (int c = 0; c < fin; ++c) flat.segment(c * len, len) = in.row(c).transpose();
  const Eigen::VectorXd got = m.LayerOperatorMatrix(1) * flat;
  for (int o = 0; o < conv.rows(); ++o)
    CHECK((got.segment(o * len, len) - conv.row(o).transpose()).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK_THROWS_AS(m.LayerOperatorMatrix(0), Error);
}

TEST_CASE("readouts") {
  AggGnnModel::Config c;
  c.a = 1;
  c.nodes = 2;
  c.layers = {Layer(1, 1, 1)};
  const Signal x = Vec({1, 2});
  c.readout = ReadoutKind::kMean;
  CHECK(AggGnnModel::FromWeights(c, {{1.0}}).Forward(Swap2(), x).readout == 1.5);
  c.readout = ReadoutKind::kLinear;
  const auto lin = AggGnnModel::FromWeights(c, {{1.0}}, {1, 0, 0, 10});
  // per_node rows: [1, 2] and [2, 1].
  CHECK(lin.Forward(Swap2(), x).readout == 11.0);
  CHECK(ReadoutIndex(1, 0, 1, 1, 2) == 3);
}

TEST_CASE("selection gnn") {
  SelGnnModel one({{2, 1, 1, Nonlinearity::kRelu, {0, 1}}});
  const Matrix y = one.Forward(Swap2(), Vec({1, 2}));
  CHECK(y(0, 0) == 2.0);
  CHECK(y(1, 0) == 1.0);
  SelGnnModel ident({{1, 1, 1, Nonlinearity::kIdentity, {1}}});
  CHECK(ident.Forward(Path3(), Vec({1, -2, 3})) == Matrix(Vec({1, -2, 3})));
  SelGnnModel zero({{3, 1, 2, Nonlinearity::kTanh, std::vector<double>(6, 0.0)}});
  CHECK(zero.Forward(Path3(), Vec({1, -2, 3})).isZero());
  const auto two = SelGnnModel::Initialize({{5, 1, 32, Nonlinearity::kRelu, {}},
                                            {5, 32, 8, Nonlinearity::kRelu, {}}},
                                           1);
  CHECK(two.Forward(Path3(), Vec({1, 2, 3})).cols() == 8);
  CHECK_THROWS_AS(SelGnnModel({{2, 1, 1, Nonlinearity::kRelu, {1}}}), Error);
}

TEST_CASE("permutation conjugate") {
  const Graph p3 = Graph::FromShift(Path3());
  const Signal x = Vec({1, 2, 3});
  const auto same = PermutationConjugate(p3, x, {0, 1, 2});
  CHECK(same.graph.shift() == p3.shift());
  CHECK(same.signal == x);
  const Graph sw = Graph::FromShift(Swap2());
  const auto once = PermutationConjugate(sw, Vec({1, 2}), {1, 0});
  const auto twice = PermutationConjugate(once.graph, once.signal, {1, 0});
  CHECK(twice.signal == Vec({1, 2}));
  const auto rev = PermutationConjugate(p3, x, {2, 1, 0});
  CHECK(rev.graph.shift() == p3.shift());
  CHECK(rev.signal == Vec({3, 2, 1}));
  CHECK_THROWS_AS(PermutationConjugate(p3, x, {0, 0, 1}), Error);
}

TEST_CASE("shared-mode forward is permutation equivariant") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Graph g = RandomGraph(ErdosRenyi{0.5}, 6, trial);
    std::vector<int> perm(6);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Signal x = Signal::Random(6);
    const auto m = AggGnnModel::Initialize(TwoLayer(5), trial);
    const auto base = m.Forward(g.shift(), x);
    const auto conj = PermutationConjugate(g, x, perm);
    const auto moved = m.Forward(conj.graph.shift(), conj.signal);
    for (int i = 0; i < 6; ++i)
      CHECK((moved.per_node.row(perm[i]) - base.per_node.row(i)).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(moved.readout == doctest::Approx(base.readout).epsilon(1e-12));
  }
}

}  // namespace
}  // namespace aggstab
