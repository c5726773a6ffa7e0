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

#ifndef AGGSTAB_STABILITY_HPP_
#define AGGSTAB_STABILITY_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aggstab/agg_gnn.hpp"
#include "aggstab/datasets.hpp"
#include "aggstab/filters.hpp"
#include "aggstab/graph.hpp"
#include "aggstab/training.hpp"

namespace aggstab {

enum class BoundLayer { kFirstLayer, kFullNetwork };

const char* ToString(BoundLayer v);
BoundLayer ParseBoundLayer(const std::string& s);

struct SweepConfig {
  std::vector<double> epsilons;  // ascending, >= 0
  int trials = 10;
  PerturbationKind kind = PerturbationKind::kMultiplicative;
  int probe_signals = 16;
  std::uint64_t seed = 0;
  BoundLayer bound_layer = BoundLayer::kFirstLayer;
  int threads = 1;

  void Validate() const;
};

struct StabilityRecord {
  double epsilon = 0.0;
  int trial = 0;
  PerturbationKind kind = PerturbationKind::kMultiplicative;
  double empirical = 0.0;
  double bound = 0.0;
  double ratio = 0.0;  // empirical / bound, +inf when bound = 0
};

// Random Gaussian signals normalized to unit Euclidean norm.
std::vector<Signal> RandomProbes(int n, int count, std::uint64_t seed);

// max over probes of ||Phi(S) x - Phi(S~) x|| / ||x||, using the first-layer
// operator or the full network's per-node outputs.
double OutputDifference(const AggGnnModel& model, const Matrix& s, const Matrix& s_tilde,
                        const std::vector<Signal>& probes, BoundLayer layer);

// Target spectral norms (t0, t1) that a perturbation of size epsilon gets.
std::pair<double, double> SplitEpsilon(PerturbationKind kind, double epsilon);

// Multiplier applied on top of the first-layer bound: sqrt(F_1) for a bank of
// F_1 first-layer filters, times the deeper-layer operator norms for the full
// network.
std::vector<double> BoundMultipliers(const AggGnnModel& model, BoundLayer layer);

// Records in canonical (epsilon index, trial) order. Fails with a numeric-domain
// error when the estimate's interval misses an eigenvalue of S or of some S~.
std::vector<StabilityRecord> RunSweep(const AggGnnModel& model, const Graph& graph,
                                      const SweepConfig& cfg, const LipschitzEstimate& estimate);

// Records whose ratio exceeds `slack`. Records with a zero bound count only
// when their empirical difference is nonzero.
std::vector<StabilityRecord> BoundCheck(const std::vector<StabilityRecord>& records,
                                        double slack = 1.1);

struct EpsilonSummary {
  double epsilon = 0.0;
  double median = 0.0;
};

std::vector<EpsilonSummary> MediansByEpsilon(const std::vector<StabilityRecord>& records);

std::string RecordsCsv(const std::vector<StabilityRecord>& records);
std::vector<StabilityRecord> ParseRecordsCsv(const std::string& csv);
std::string SummaryJson(const std::vector<StabilityRecord>& records, double slack = 1.1);
std::string MediansDat(const std::vector<StabilityRecord>& records);

// Minimal log-log SVG line chart of median empirical difference against
// epsilon (epsilon = 0 and zero medians are left off the log axes).
std::string MediansSvg(const std::vector<StabilityRecord>& records);

// Writes <prefix>.csv and <prefix>.summary.json (and <prefix>.dat when asked).
void EmitReport(const std::vector<StabilityRecord>& records, const std::string& prefix,
                bool with_dat = false, double slack = 1.1);

// Rescales the first-layer filters by one common factor (never enlarging them)
// so that the bank certifies under the targets; constants are homogeneous in
// the coefficients, so the factor is exact.
AggGnnModel ScaleToCertify(const AggGnnModel& model, const Omega& omega, double l0_target,
                           double l1_target, double* factor_out = nullptr);

struct TrendConfig {
  std::vector<int> a_values;
  AggGnnModel::Config model;  // `a` is overwritten per entry
  std::uint64_t model_seed = 0;
  // Used when a task is given.
  LossSpec loss;               // penalty weights apply only when constrained
  OptimizerState optimizer;
  int epochs = 50;
  int batch_size = 10;
  // Used without a task: rescale random filters to these targets when constrained.
  double l0_target = 1.0;
  double l1_target = 1.0;
};

struct TrendTable {
  std::vector<int> a_values;
  std::vector<double> epsilons;
  std::vector<std::vector<double>> medians;  // [a index][epsilon index]
  std::vector<double> final_train_loss;      // per a, NaN without a task
  bool nondecreasing = true;                 // medians nondecreasing in a at every epsilon
};

TrendTable CompareAggregationCounts(const Graph& graph, const RegressionTask* task,
                                    const TrendConfig& trend, const SweepConfig& cfg,
                                    bool constrained);

}  // namespace aggstab

#endif  // AGGSTAB_STABILITY_HPP_
