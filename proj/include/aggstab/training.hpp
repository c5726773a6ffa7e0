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

#ifndef AGGSTAB_TRAINING_HPP_
#define AGGSTAB_TRAINING_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aggstab/agg_gnn.hpp"
#include "aggstab/datasets.hpp"
#include "aggstab/filters.hpp"

namespace aggstab {

struct LossSpec {
  double smooth_l1_beta = 1.0;
  double penalty_l0_weight = 0.0;
  double penalty_l1_weight = 0.0;
  double l0_target = 0.0;
  double l1_target = 0.0;
  Omega omega{-1.0, 1.0, 256};

  void Validate() const;
  bool HasPenalty() const { return penalty_l0_weight > 0.0 || penalty_l1_weight > 0.0; }
};

struct OptimizerState {
  double lr = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;

  void Validate() const;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  int probe_count = 0;
  int excluded = 0;  // probes whose +/- step crossed a kink
};

double SmoothL1(double pred, double target, double beta = 1.0);
// d/dpred of SmoothL1.
double SmoothL1Grad(double pred, double target, double beta = 1.0);

struct PenaltyResult {
  double value = 0.0;
  // One gradient per filter, aligned with the filter coefficients.
  std::vector<std::vector<double>> grads;
};

// Mean over grid samples of sum over filters and cyclic shifts of the squared
// excess of |p_m'(l)| over l0_target (weighted by penalty_l0_weight) and of
// |l p_m'(l)| over l1_target (weighted by penalty_l1_weight).
PenaltyResult LipschitzPenaltyWithGrad(const std::vector<PolyFilter>& filters, const LossSpec& spec);
double LipschitzPenalty(const std::vector<PolyFilter>& filters, const LossSpec& spec);

using Batch = std::vector<const Sample*>;

struct LossGradient {
  double objective = 0.0;  // data_loss + penalty
  double data_loss = 0.0;  // mean smooth L1 over the batch
  double penalty = 0.0;
  std::vector<double> grad;  // aligned with AggGnnModel::FlatParameters()
};

double Objective(const AggGnnModel& model, const Matrix& s, const Batch& batch, const LossSpec& spec);

// Exact reverse-mode gradient of Objective. relu/abs take subgradient 0 at 0;
// max pooling routes to the first maximal position.
LossGradient Backward(const AggGnnModel& model, const Matrix& s, const Batch& batch,
                      const LossSpec& spec);

void AdamStep(OptimizerState& state, std::span<double> weights, std::span<const double> grads);

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double penalty = 0.0;
  double test_loss = 0.0;  // NaN when the task has no test samples
};

struct TrainResult {
  AggGnnModel model;
  std::vector<EpochStats> history;
};

double MeanLoss(const AggGnnModel& model, const RegressionTask& task, const std::vector<int>& indices,
                double beta);

TrainResult Train(AggGnnModel model, const RegressionTask& task, const LossSpec& spec,
                  OptimizerState optimizer, int epochs, int batch_size, std::uint64_t seed);

GradCheckReport GradCheck(const AggGnnModel& model, const Matrix& s, const Batch& batch,
                          const LossSpec& spec, double fd_step = 1e-5, std::uint64_t seed = 0,
                          int probes = 32);

std::string HistoryCsv(const std::vector<EpochStats>& history);

}  // namespace aggstab

#endif  // AGGSTAB_TRAINING_HPP_
